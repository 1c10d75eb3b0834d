#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pnw/io.hpp"

namespace pnw {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ParseError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

// Sequential reader that reports the exact byte offset of any truncation.
class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  const std::uint8_t* need(std::size_t n) {
    if (remaining() < n) {
      fail(ErrorCode::ParseError,
           path_ + ": truncated at byte offset " + std::to_string(bytes_.size()) +
               " (needed " + std::to_string(pos_ + n) + " bytes)");
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint8_t u8() { return *need(1); }

  std::uint32_t u32_be() {
    const std::uint8_t* p = need(4);
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
  }

  std::uint32_t u32_le() {
    const std::uint8_t* p = need(4);
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
           (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  }

  std::uint16_t u16_le() {
    const std::uint8_t* p = need(2);
    return std::uint16_t(p[0] | (p[1] << 8));
  }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::ParseError,
         path_ + ": " + what + " at byte offset " + std::to_string(pos_));
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

struct Tensor {
  ImageShape shape;        // per-image shape
  Index count = 0;         // number of images
  std::vector<std::uint8_t> pixels;
};

ImageShape shape_from_dims(const std::vector<Index>& per_image,
                           ByteReader& reader) {
  ImageShape shape;
  if (per_image.size() == 2) {
    shape = {ImageKind::Gray2D, per_image[0], per_image[1], 1};
  } else if (per_image.size() == 3 && per_image[2] == 3) {
    shape = {ImageKind::Color2D, per_image[0], per_image[1], 3};
  } else if (per_image.size() == 3) {
    shape = {ImageKind::Volume3D, per_image[0], per_image[1], per_image[2]};
  } else {
    reader.error("unsupported tensor rank " +
                 std::to_string(per_image.size() + 1));
  }
  if (shape.byte_count() <= 0) reader.error("zero-sized image dimensions");
  return shape;
}

Tensor read_idx_images(const std::string& path) {
  ByteReader reader(read_file(path), path);
  const std::uint32_t magic = reader.u32_be();
  if (magic != 0x00000803u)
    reader.error("bad IDX image magic 0x" + [&] {
      std::ostringstream os;
      os << std::hex << magic;
      return os.str();
    }());
  Tensor t;
  t.count = static_cast<Index>(reader.u32_be());
  const Index rows = static_cast<Index>(reader.u32_be());
  const Index cols = static_cast<Index>(reader.u32_be());
  t.shape = shape_from_dims({rows, cols}, reader);
  const std::size_t n =
      static_cast<std::size_t>(t.count) * static_cast<std::size_t>(t.shape.byte_count());
  const std::uint8_t* p = reader.need(n);
  t.pixels.assign(p, p + n);
  return t;
}

std::vector<int> read_idx_labels(const std::string& path, Index expected_count) {
  ByteReader reader(read_file(path), path);
  const std::uint32_t magic = reader.u32_be();
  if (magic != 0x00000801u) reader.error("bad IDX label magic");
  const Index count = static_cast<Index>(reader.u32_be());
  if (count != expected_count)
    fail(ErrorCode::CountMismatch,
         path + " holds " + std::to_string(count) + " labels for " +
             std::to_string(expected_count) + " images");
  const std::uint8_t* p = reader.need(static_cast<std::size_t>(count));
  std::vector<int> labels(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) labels[static_cast<std::size_t>(i)] = p[i];
  return labels;
}

Tensor read_raw(const std::string& path) {
  ByteReader reader(read_file(path), path);
  const std::uint32_t ndims = reader.u32_le();
  if (ndims < 3 || ndims > 4)
    reader.error("RAW rank " + std::to_string(ndims) + " not supported");
  std::vector<Index> dims(ndims);
  for (auto& d : dims) d = static_cast<Index>(reader.u32_le());
  const std::uint8_t dtype = reader.u8();
  if (dtype != 1) reader.error("RAW element type tag must be 1 (u8)");
  Tensor t;
  t.count = dims[0];
  t.shape = shape_from_dims({dims.begin() + 1, dims.end()}, reader);
  const std::size_t n =
      static_cast<std::size_t>(t.count) * static_cast<std::size_t>(t.shape.byte_count());
  const std::uint8_t* p = reader.need(n);
  t.pixels.assign(p, p + n);
  return t;
}

Tensor read_npy(const std::string& path) {
  ByteReader reader(read_file(path), path);
  static const std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  const std::uint8_t* m = reader.need(6);
  if (!std::equal(kMagic, kMagic + 6, m)) reader.error("not an NPY file");
  const std::uint8_t major = reader.u8();
  reader.u8();  // minor
  std::size_t header_len;
  if (major == 1)
    header_len = reader.u16_le();
  else if (major == 2 || major == 3)
    header_len = reader.u32_le();
  else
    reader.error("unsupported NPY version " + std::to_string(major));
  const std::uint8_t* hp = reader.need(header_len);
  const std::string header(reinterpret_cast<const char*>(hp), header_len);

  auto find_value = [&](const std::string& key) -> std::string {
    const auto k = header.find("'" + key + "'");
    if (k == std::string::npos) reader.error("NPY header missing '" + key + "'");
    auto c = header.find(':', k);
    if (c == std::string::npos) reader.error("malformed NPY header");
    ++c;
    while (c < header.size() && header[c] == ' ') ++c;
    return header.substr(c);
  };

  const std::string descr = find_value("descr");
  if (descr.rfind("'|u1'", 0) != 0)
    reader.error("NPY dtype must be |u1 (raw 8-bit pixels)");
  const std::string order = find_value("fortran_order");
  if (order.rfind("False", 0) != 0)
    reader.error("NPY fortran_order must be False");

  std::string shape_str = find_value("shape");
  const auto open = shape_str.find('(');
  const auto close = shape_str.find(')');
  if (open == std::string::npos || close == std::string::npos)
    reader.error("malformed NPY shape");
  shape_str = shape_str.substr(open + 1, close - open - 1);
  std::vector<Index> dims;
  std::stringstream ss(shape_str);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string trimmed;
    for (char c : item)
      if (!std::isspace(static_cast<unsigned char>(c))) trimmed += c;
    if (trimmed.empty()) continue;
    dims.push_back(static_cast<Index>(std::stoll(trimmed)));
  }
  if (dims.size() < 3 || dims.size() > 4)
    reader.error("NPY rank " + std::to_string(dims.size()) + " not supported");

  Tensor t;
  t.count = dims[0];
  t.shape = shape_from_dims({dims.begin() + 1, dims.end()}, reader);
  const std::size_t n =
      static_cast<std::size_t>(t.count) * static_cast<std::size_t>(t.shape.byte_count());
  const std::uint8_t* p = reader.need(n);
  t.pixels.assign(p, p + n);
  return t;
}

// "id,label" rows in file order, with an optional header line.
std::vector<int> read_csv_labels(const std::string& path, Index expected_count) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open " + path);
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1 && !line.empty() &&
        !std::isdigit(static_cast<unsigned char>(line[0])) && line[0] != '-')
      continue;  // header
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      fail(ErrorCode::ParseError,
           path + " line " + std::to_string(line_no) + ": expected id,label");
    try {
      const std::int64_t id = std::stoll(line.substr(0, comma));
      const int label = std::stoi(line.substr(comma + 1));
      if (id != static_cast<std::int64_t>(labels.size()))
        fail(ErrorCode::ParseError,
             path + " line " + std::to_string(line_no) + ": ids must run 0.." +
                 std::to_string(expected_count - 1) + " in order, got " +
                 std::to_string(id));
      labels.push_back(label);
    } catch (const std::invalid_argument&) {
      fail(ErrorCode::ParseError,
           path + " line " + std::to_string(line_no) + ": not a number");
    } catch (const std::out_of_range&) {
      fail(ErrorCode::ParseError,
           path + " line " + std::to_string(line_no) + ": number out of range");
    }
  }
  if (static_cast<Index>(labels.size()) != expected_count)
    fail(ErrorCode::CountMismatch,
         path + " holds " + std::to_string(labels.size()) + " labels for " +
             std::to_string(expected_count) + " images");
  return labels;
}

}  // namespace

DatasetFormat dataset_format_from_string(const std::string& tag) {
  if (tag == "idx") return DatasetFormat::Idx;
  if (tag == "raw") return DatasetFormat::Raw;
  if (tag == "npy") return DatasetFormat::Npy;
  fail(ErrorCode::ParseError, "unknown dataset format '" + tag + "'");
}

IngestResult ingest(const std::string& images_path,
                    const std::string& labels_path, DatasetFormat format,
                    bool labels_one_based, int expected_n_labels) {
  Tensor tensor;
  std::vector<int> raw_labels;
  switch (format) {
    case DatasetFormat::Idx:
      tensor = read_idx_images(images_path);
      raw_labels = read_idx_labels(labels_path, tensor.count);
      break;
    case DatasetFormat::Raw:
      tensor = read_raw(images_path);
      raw_labels = read_csv_labels(labels_path, tensor.count);
      break;
    case DatasetFormat::Npy:
      tensor = read_npy(images_path);
      raw_labels = read_csv_labels(labels_path, tensor.count);
      break;
  }

  const int shift = labels_one_based ? 0 : 1;
  std::vector<int> labels(raw_labels.size());
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    const int label = raw_labels[i] + shift;
    if (label < 1 || (expected_n_labels > 0 && label > expected_n_labels)) {
      fail(ErrorCode::LabelRangeError,
           "image " + std::to_string(i) + " has label " +
               std::to_string(raw_labels[i]) + " (shifted " +
               std::to_string(label) + "), expected 1.." +
               std::to_string(expected_n_labels));
    }
    labels[i] = label;
  }

  IngestResult result{
      Dataset(tensor.shape, std::move(tensor.pixels), std::move(labels)),
      shift};
  return result;
}

}  // namespace pnw
