#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnw/core.hpp"
#include "pnw/ensemble.hpp"
#include "pnw/trainer.hpp"

namespace pnw {

// ---------------------------------------------------------------------------
// Dataset ingestion

enum class DatasetFormat { Idx, Raw, Npy };

DatasetFormat dataset_format_from_string(const std::string& tag);

struct IngestResult {
  Dataset dataset;
  int label_shift = 0;  // added to every file label to reach the 1-based ids
};

/// Reads an image file plus its label file into a Dataset.
///
///   Idx  big-endian IDX pair: images magic 0x00000803 (n, rows, cols, u8),
///        labels magic 0x00000801 (n, u8).
///   Raw  little-endian header: u32 dim count, u32 dims, u8 element-type tag
///        (1 = u8), then packed pixels; labels come from a CSV "id,label"
///        file. Rank 3 dims are (n, rows, cols) grayscale; rank 4 with a
///        trailing 3 is (n, rows, cols, 3) interleaved color; any other
///        rank-4 file is (n, depth, rows, cols) volumes.
///   Npy  NPY v1/v2 tensor of dtype |u1 (C order), same rank rules as Raw,
///        with the same CSV label file.
///
/// File labels are shifted by +1 unless labels_one_based is set; ids are
/// assigned by file order. When expected_n_labels > 0 any shifted label
/// outside 1..expected_n_labels raises LabelRangeError.
IngestResult ingest(const std::string& images_path,
                    const std::string& labels_path, DatasetFormat format,
                    bool labels_one_based = false, int expected_n_labels = 0);

// ---------------------------------------------------------------------------
// Run configuration

struct DatasetConfig {
  std::string images;
  std::string labels;
  std::string format = "idx";
  bool labels_one_based = false;
};

/// Everything one training or audit run needs, parsed from a JSON file.
struct RunConfig {
  DatasetConfig dataset;
  int n_labels = 0;
  std::vector<std::vector<int>> classes;
  int n_groups = 1;
  int hidden = 0;
  std::vector<FeatureSpec> features;
  SgdConfig sgd;
  GdtConfig gdt;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::vector<std::int64_t> exclude_ids;

  PnwArchitecture architecture() const;
};

RunConfig parse_run_config_json(const nlohmann::json& j);
RunConfig parse_run_config(const std::string& path);

/// Canonical JSON echo of a config: fixed key order, so identical configs
/// serialize to identical bytes.
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);

/// Fills in every feature spec's output_dims from the dataset image shape
/// (checking any explicitly configured value) so the architecture is fully
/// concrete before validation.
void resolve_feature_dims(PnwArchitecture& arch, const ImageShape& shape);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// On disk: magic "PNWC", u32 version, the canonical config JSON, all ANN
/// parameter blobs as little-endian 64-bit floats (w1 row-major, b1, w2
/// row-major, b2, label_map), then the training report JSON. Loading a saved
/// checkpoint reproduces every weight bit-exactly.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_json;
  PnwModel model;
  std::string reports_json;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pnw
