#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pnw/io.hpp"

namespace pnw {

namespace {

constexpr char kMagic[4] = {'P', 'N', 'W', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_i32(std::string& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class BlobReader {
 public:
  BlobReader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  const char* need(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      fail(ErrorCode::ParseError,
           path_ + ": checkpoint truncated at byte offset " +
               std::to_string(bytes_.size()));
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint32_t u32() {
    const auto* p = reinterpret_cast<const std::uint8_t*>(need(4));
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
           (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  }

  std::uint64_t u64() {
    std::uint64_t v = 0;
    const auto* p = reinterpret_cast<const std::uint8_t*>(need(8));
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string str(std::size_t n) { return std::string(need(n), n); }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, ckpt.version);

  put_u64(out, ckpt.config_json.size());
  out += ckpt.config_json;

  const PnwArchitecture& arch = ckpt.model.arch;
  put_u32(out, static_cast<std::uint32_t>(arch.n_classes()));
  put_u32(out, static_cast<std::uint32_t>(arch.n_groups));
  put_u32(out, static_cast<std::uint32_t>(arch.n_features()));
  put_u32(out, static_cast<std::uint32_t>(arch.n_labels));

  for (const Ann& ann : ckpt.model.anns) {
    put_u32(out, static_cast<std::uint32_t>(ann.input_size()));
    put_u32(out, static_cast<std::uint32_t>(ann.hidden_size()));
    put_u32(out, static_cast<std::uint32_t>(ann.output_size()));
    for (Index r = 0; r < ann.w1.rows(); ++r)
      for (Index c = 0; c < ann.w1.cols(); ++c) put_f64(out, ann.w1(r, c));
    for (Index i = 0; i < ann.b1.size(); ++i) put_f64(out, ann.b1[i]);
    for (Index r = 0; r < ann.w2.rows(); ++r)
      for (Index c = 0; c < ann.w2.cols(); ++c) put_f64(out, ann.w2(r, c));
    for (Index i = 0; i < ann.b2.size(); ++i) put_f64(out, ann.b2[i]);
    put_u32(out, static_cast<std::uint32_t>(ann.label_map.size()));
    for (int label : ann.label_map) put_i32(out, label);
  }

  put_u64(out, ckpt.reports_json.size());
  out += ckpt.reports_json;

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(ErrorCode::ParseError, "cannot write " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) fail(ErrorCode::ParseError, "short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail(ErrorCode::ParseError, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(file)),
                    std::istreambuf_iterator<char>());
  BlobReader reader(std::move(bytes), path);

  if (std::memcmp(reader.need(4), kMagic, 4) != 0)
    fail(ErrorCode::ParseError, path + " is not a checkpoint file");
  Checkpoint ckpt;
  ckpt.version = reader.u32();
  if (ckpt.version != kCheckpointVersion) {
    fail(ErrorCode::VersionMismatch,
         path + " has checkpoint version " + std::to_string(ckpt.version) +
             ", this build reads version " + std::to_string(kCheckpointVersion));
  }

  const std::uint64_t config_len = reader.u64();
  ckpt.config_json = reader.str(config_len);
  RunConfig cfg;
  try {
    cfg = parse_run_config_json(nlohmann::json::parse(ckpt.config_json));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path + ": embedded config: " + e.what());
  }
  ckpt.model.arch = cfg.architecture();

  const auto n_c = reader.u32();
  const auto n_g = reader.u32();
  const auto n_f = reader.u32();
  const auto n_labels = reader.u32();
  const PnwArchitecture& arch = ckpt.model.arch;
  if (n_c != static_cast<std::uint32_t>(arch.n_classes()) ||
      n_g != static_cast<std::uint32_t>(arch.n_groups) ||
      n_f != static_cast<std::uint32_t>(arch.n_features()) ||
      n_labels != static_cast<std::uint32_t>(arch.n_labels)) {
    fail(ErrorCode::ParseError,
         path + ": shape header disagrees with the embedded config");
  }

  ckpt.model.anns.resize(static_cast<std::size_t>(arch.total_anns()));
  for (Ann& ann : ckpt.model.anns) {
    const Index input = static_cast<Index>(reader.u32());
    const Index hidden = static_cast<Index>(reader.u32());
    const Index output = static_cast<Index>(reader.u32());
    ann.w1.resize(hidden, input);
    ann.b1.resize(hidden);
    ann.w2.resize(output, hidden);
    ann.b2.resize(output);
    for (Index r = 0; r < hidden; ++r)
      for (Index c = 0; c < input; ++c) ann.w1(r, c) = reader.f64();
    for (Index i = 0; i < hidden; ++i) ann.b1[i] = reader.f64();
    for (Index r = 0; r < output; ++r)
      for (Index c = 0; c < hidden; ++c) ann.w2(r, c) = reader.f64();
    for (Index i = 0; i < output; ++i) ann.b2[i] = reader.f64();
    const auto map_len = reader.u32();
    if (map_len != static_cast<std::uint32_t>(output))
      fail(ErrorCode::ParseError, path + ": label map length mismatch");
    ann.label_map.resize(map_len);
    for (auto& label : ann.label_map) label = reader.i32();
  }

  const std::uint64_t reports_len = reader.u64();
  ckpt.reports_json = reader.str(reports_len);
  if (!reader.at_end())
    fail(ErrorCode::ParseError, path + ": trailing bytes after checkpoint");
  return ckpt;
}

}  // namespace pnw
