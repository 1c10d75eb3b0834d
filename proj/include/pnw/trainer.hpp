#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pnw/ann.hpp"
#include "pnw/core.hpp"

namespace pnw {

struct AnnIndex {
  int class_i = 0;
  int group_j = 0;
  int feature_k = 0;

  bool operator==(const AnnIndex&) const = default;
};

/// Training subset of one ANN: home-group samples first (dataset order),
/// then expat samples (draw order). One column of `inputs` per sample.
struct TrainingLoad {
  AnnIndex index;
  Eigen::MatrixXd inputs;                 // input_dim x n_samples
  std::vector<Index> targets;             // output node index per sample
  std::vector<std::int64_t> sample_ids;   // originating dataset ids
  Index home_count = 0;
  Index expat_count = 0;

  Index size() const { return static_cast<Index>(targets.size()); }
};

/// Two byte-identical images carrying different ground-truth labels.
struct DuplicatePair {
  std::int64_t id_a = 0;  // always the smaller id
  std::int64_t id_b = 0;
  int label_a = 0;
  int label_b = 0;

  bool operator==(const DuplicatePair&) const = default;
};

struct SgdConfig {
  int batch_size = 32;
  double rate = 0.1;
  double momentum = 0.0;
  int max_epochs = 200;
};

struct GdtConfig {
  int max_rounds = 10000;
  double rate = 0.05;
  int batch_size = 32;
  // Any sample whose loss is below guard_loss is necessarily classified
  // correctly (its output is strictly inside the target one-hot's cell).
  // Correct samples above the guard are rehearsed alongside the misclassified
  // ones; the guard tightens by `tighten` after `patience` stagnant rounds.
  double guard_loss = 0.25;
  double tighten = 0.9;
  int patience = 20;
  // Gradient emphasis on misclassified samples (applied to the de-saturated
  // output delta, see gdt_train).
  double boost = 4.0;
};

struct SgdResult {
  int epochs = 0;
  Index errors = 0;  // misclassified load samples when SGD stopped
};

struct GdtReport {
  int epochs_sgd = 0;
  int rounds_gdt = 0;
  Index final_train_errors = 0;
  double wall_time = 0.0;  // seconds; diagnostic only, never serialized
};

/// Thrown by gdt_train when the load embeds a contradiction, and by callers
/// that audit whole datasets. Carries the offending id pairs.
class DoubleLabelError : public Error {
 public:
  DoubleLabelError(std::string what,
                   std::vector<std::pair<std::int64_t, std::int64_t>> pairs)
      : Error(ErrorCode::DoubleLabelDetected, std::move(what)),
        pairs_(std::move(pairs)) {}

  const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs() const {
    return pairs_;
  }

 private:
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs_;
};

/// Thrown by gdt_train when the round cap is hit with errors remaining.
class RoundLimitError : public Error {
 public:
  RoundLimitError(std::string what, std::vector<std::int64_t> residual_ids)
      : Error(ErrorCode::RoundLimitExceeded, std::move(what)),
        residual_ids_(std::move(residual_ids)) {}

  const std::vector<std::int64_t>& residual_ids() const { return residual_ids_; }

 private:
  std::vector<std::int64_t> residual_ids_;
};

/// All unordered pairs of byte-identical images with differing labels, each
/// reported once as (min id, max id), sorted by (id_a, id_b). Identical
/// images with identical labels are not reported.
std::vector<DuplicatePair> detect_double_labels(const Dataset& ds);

/// Builds the N_T per-ANN training loads.
///
/// Each datum belongs to the class owning its label; within the class it is
/// home to exactly one group, by contiguous chunking in dataset order with
/// chunk size ceil(n_class / n_groups). Every ANN (i,j,k) trains on all home
/// data of group (i,j) under feature k; when the model has two or more
/// classes it additionally receives expat samples (targeted at the expat
/// node) in a 1:1 ratio to its home samples, drawn without replacement,
/// round-robin over all other (class, group) cells in lexicographic order,
/// uniformly within each cell. All n_f ANNs of a group share one expat draw.
std::vector<TrainingLoad> assign_loads(const Dataset& ds,
                                       const PnwArchitecture& arch,
                                       SeededRng& rng);

/// Mini-batch SGD on the mean sample loss. Stops when every load sample is
/// classified correctly or at the epoch cap; non-convergence is not an error
/// here. Shuffle schedule comes from `rng`, so results are reproducible.
SgdResult sgd_train(Ann& ann, const TrainingLoad& load, const SgdConfig& cfg,
                    SeededRng& rng);

/// Gradient descent tunneling: drives the ANN to zero classification errors
/// on its load or fails with a typed error.
///
/// Mechanism: every round re-scans the load, then runs one mini-batch pass
/// over the misclassified samples plus all correct samples whose loss still
/// exceeds the guard threshold. Misclassified samples use a de-saturated,
/// boosted output delta (the logistic-derivative factor is dropped) so
/// saturated outputs cannot park the descent on a plateau; rehearsed samples
/// use the plain loss gradient. The guard threshold tightens multiplicatively
/// whenever the error count stagnates. Success is confirmed by a per-sample
/// predict() pass, never by the batched scan alone.
///
/// Throws DoubleLabelError when the load contains byte-identical feature
/// vectors with different targets (zero error is impossible), and
/// RoundLimitError when the round cap is reached with errors remaining.
GdtReport gdt_train(Ann& ann, const TrainingLoad& load, const GdtConfig& cfg,
                    SeededRng& rng);

/// Misclassified sample count via the exact per-sample inference path.
Index count_load_errors(const Ann& ann, const TrainingLoad& load);

}  // namespace pnw
