#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "pnw/common.hpp"
#include "pnw/features.hpp"
#include "pnw/image.hpp"

namespace pnw {

/// The label set. Ground-truth labels are 1..n_labels; when a model has two
/// or more classes an auxiliary "expat" label n_labels + 1 is shared by all
/// of them (read: "not from my class / group").
struct LabelSpace {
  int n_labels = 0;
  bool has_expat = false;

  int expat_id() const { return n_labels + 1; }
};

/// Ordered partition of the ground-truth labels into per-class subsets.
/// Subsets are disjoint and non-empty and together cover {1..n_labels};
/// classes share no ground-truth label (only the expat label, implicitly).
struct ClassPartition {
  std::vector<std::vector<int>> classes;

  int n_classes() const { return static_cast<int>(classes.size()); }
};

/// Shape of the whole web: n_c classes x n_g groups x n_f featured ANNs,
/// plus everything needed to build each ANN.
struct PnwArchitecture {
  int n_labels = 0;
  ClassPartition partition;
  int n_groups = 0;
  int hidden_nodes = 0;
  std::vector<FeatureSpec> feature_specs;  // one per feature slot
  std::uint64_t seed = 0;

  int n_classes() const { return partition.n_classes(); }
  int n_features() const { return static_cast<int>(feature_specs.size()); }
  int total_anns() const { return n_classes() * n_groups * n_features(); }

  int ann_linear_index(int class_i, int group_j, int feature_k) const {
    return (class_i * n_groups + group_j) * n_features() + feature_k;
  }

  LabelSpace label_space() const {
    return LabelSpace{n_labels, n_classes() >= 2};
  }

  /// Input vector length of every ANN in feature slot k.
  Index input_dim(int feature_k) const {
    return feature_specs[static_cast<std::size_t>(feature_k)].output_dims;
  }

  /// Output width branch of class i: its labels, plus one expat node when the
  /// model has at least two classes.
  int output_width(int class_i) const {
    const auto& ls = partition.classes[static_cast<std::size_t>(class_i)];
    return static_cast<int>(ls.size()) + (n_classes() >= 2 ? 1 : 0);
  }

  /// Output node -> global label id for class i. Class labels in partition
  /// order, expat last when present.
  std::vector<int> label_map(int class_i) const {
    std::vector<int> m = partition.classes[static_cast<std::size_t>(class_i)];
    if (n_classes() >= 2) m.push_back(label_space().expat_id());
    return m;
  }
};

/// A labeled image set. All images share one shape; pixels are stored as raw
/// bytes (normalization to [0,1] happens in the feature transforms). Labels
/// are 1-based; ids are unique and stable across runs.
class Dataset {
 public:
  Dataset() = default;

  Dataset(ImageShape shape, std::vector<std::uint8_t> pixels,
          std::vector<int> labels, std::vector<std::int64_t> ids = {})
      : shape_(shape),
        pixels_(std::move(pixels)),
        labels_(std::move(labels)),
        ids_(std::move(ids)) {
    const Index stride = shape_.byte_count();
    if (stride <= 0) fail(ErrorCode::ZeroDimension, "empty image shape");
    if (pixels_.size() != labels_.size() * static_cast<std::size_t>(stride)) {
      fail(ErrorCode::CountMismatch,
           "pixel buffer does not hold one image per label");
    }
    if (ids_.empty()) {
      ids_.resize(labels_.size());
      for (std::size_t i = 0; i < ids_.size(); ++i)
        ids_[i] = static_cast<std::int64_t>(i);
    }
    if (ids_.size() != labels_.size())
      fail(ErrorCode::CountMismatch, "ids and labels differ in length");
    std::set<std::int64_t> seen;
    for (std::int64_t id : ids_) {
      if (!seen.insert(id).second)
        fail(ErrorCode::CountMismatch, "duplicate dataset id " + std::to_string(id));
    }
    for (int label : labels_) {
      if (label < 1)
        fail(ErrorCode::LabelRangeError,
             "label " + std::to_string(label) + " is not 1-based");
    }
  }

  Index size() const { return static_cast<Index>(labels_.size()); }
  bool empty() const { return labels_.empty(); }
  const ImageShape& shape() const { return shape_; }

  ImageView image(Index i) const {
    const Index stride = shape_.byte_count();
    return ImageView{shape_,
                     {pixels_.data() + i * stride, static_cast<std::size_t>(stride)}};
  }

  int label(Index i) const { return labels_[static_cast<std::size_t>(i)]; }
  std::int64_t id(Index i) const { return ids_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& labels() const { return labels_; }
  int max_label() const {
    return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
  }

  /// Copy without the given ids. Remaining ids keep their values.
  Dataset without_ids(const std::vector<std::int64_t>& excluded) const {
    std::set<std::int64_t> drop(excluded.begin(), excluded.end());
    std::vector<std::uint8_t> px;
    std::vector<int> lb;
    std::vector<std::int64_t> id;
    const Index stride = shape_.byte_count();
    for (Index i = 0; i < size(); ++i) {
      if (drop.count(ids_[static_cast<std::size_t>(i)])) continue;
      const auto* p = pixels_.data() + i * stride;
      px.insert(px.end(), p, p + stride);
      lb.push_back(labels_[static_cast<std::size_t>(i)]);
      id.push_back(ids_[static_cast<std::size_t>(i)]);
    }
    return Dataset(shape_, std::move(px), std::move(lb), std::move(id));
  }

 private:
  ImageShape shape_;
  std::vector<std::uint8_t> pixels_;
  std::vector<int> labels_;
  std::vector<std::int64_t> ids_;
};

// ---------------------------------------------------------------------------
// Verdicts flowing up the evaluation hierarchy.

/// One ANN's answer: the label of the nearest one-hot output and its loss.
struct AnnVerdict {
  int label = 0;
  double loss = 0.0;
};

/// Majority-vote result of one group: winning label, its vote count, and the
/// smallest loss among the ANNs that voted for it.
struct GroupVerdict {
  int label = 0;
  int votes = 0;
  double loss = 0.0;
};

using ClassVerdict = GroupVerdict;
using ModelVerdict = GroupVerdict;

// ---------------------------------------------------------------------------

/// Total trainable parameter count of one ANN: weights plus biases on both
/// layers of the single-hidden-layer shape.
inline std::int64_t param_count(std::int64_t input, std::int64_t hidden,
                                std::int64_t output) {
  if (input <= 0 || hidden <= 0 || output <= 0)
    fail(ErrorCode::ZeroDimension, "param_count needs positive dimensions");
  return input * hidden + hidden + hidden * output + output;
}

/// Checks every structural invariant of an architecture and returns it.
/// Throws Error with one of: PartitionOverlap, PartitionIncomplete,
/// TooManyClasses, ZeroDimension (plus LabelRangeError for labels outside
/// 1..n_labels).
inline const PnwArchitecture& validate_architecture(const PnwArchitecture& arch) {
  if (arch.n_labels < 2)
    fail(ErrorCode::LabelRangeError, "a label space needs at least 2 labels");
  if (arch.n_classes() == 0 || arch.n_groups == 0 || arch.n_features() == 0 ||
      arch.hidden_nodes == 0) {
    fail(ErrorCode::ZeroDimension,
         "n_c, n_g, n_f and hidden_nodes must all be positive");
  }
  for (int k = 0; k < arch.n_features(); ++k) {
    if (arch.input_dim(k) <= 0)
      fail(ErrorCode::ZeroDimension,
           "feature " + std::to_string(k) + " has no input dimension");
  }
  if (arch.n_classes() > arch.n_labels) {
    fail(ErrorCode::TooManyClasses,
         std::to_string(arch.n_classes()) + " classes for " +
             std::to_string(arch.n_labels) + " labels");
  }

  std::vector<int> owner(static_cast<std::size_t>(arch.n_labels), -1);
  for (int i = 0; i < arch.n_classes(); ++i) {
    const auto& subset = arch.partition.classes[static_cast<std::size_t>(i)];
    if (subset.empty())
      fail(ErrorCode::PartitionIncomplete,
           "class " + std::to_string(i) + " owns no labels");
    for (int label : subset) {
      if (label < 1 || label > arch.n_labels)
        fail(ErrorCode::LabelRangeError,
             "label " + std::to_string(label) + " outside 1.." +
                 std::to_string(arch.n_labels));
      int& slot = owner[static_cast<std::size_t>(label - 1)];
      if (slot >= 0)
        fail(ErrorCode::PartitionOverlap,
             "label " + std::to_string(label) + " assigned to classes " +
                 std::to_string(slot) + " and " + std::to_string(i));
      slot = i;
    }
  }
  for (int label = 1; label <= arch.n_labels; ++label) {
    if (owner[static_cast<std::size_t>(label - 1)] < 0)
      fail(ErrorCode::PartitionIncomplete,
           "label " + std::to_string(label) + " is assigned to no class");
  }
  return arch;
}

/// Class owning a given ground-truth label. Architecture must be valid.
inline int class_of_label(const PnwArchitecture& arch, int label) {
  for (int i = 0; i < arch.n_classes(); ++i) {
    const auto& subset = arch.partition.classes[static_cast<std::size_t>(i)];
    if (std::find(subset.begin(), subset.end(), label) != subset.end()) return i;
  }
  fail(ErrorCode::LabelRangeError,
       "label " + std::to_string(label) + " belongs to no class");
}

}  // namespace pnw
