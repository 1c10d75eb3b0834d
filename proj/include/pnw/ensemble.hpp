#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "pnw/ann.hpp"
#include "pnw/core.hpp"
#include "pnw/trainer.hpp"

namespace pnw {

/// The assembled web: one ANN per (class, group, feature) triple, stored in
/// ann_linear_index order. Immutable during inference.
struct PnwModel {
  PnwArchitecture arch;
  std::vector<Ann> anns;

  const Ann& ann(int class_i, int group_j, int feature_k) const {
    return anns[static_cast<std::size_t>(
        arch.ann_linear_index(class_i, group_j, feature_k))];
  }
  Ann& ann(int class_i, int group_j, int feature_k) {
    return anns[static_cast<std::size_t>(
        arch.ann_linear_index(class_i, group_j, feature_k))];
  }
};

/// Majority vote over one group's ANN verdicts. The winner is the modal
/// label; its vote count is the mode and its loss is the smallest loss among
/// the ANNs that voted for it. Mode ties go to the label with the smallest
/// such loss; when the losses are identical too, one of the tied labels
/// (sorted ascending) is drawn uniformly from `rng`. The rng is consumed only
/// when a random tie-break is actually needed.
GroupVerdict group_vote(std::span<const AnnVerdict> verdicts, SeededRng& rng);

/// Winner-takes-all over one class's group verdicts: the group with the most
/// votes wins and its (label, votes, loss) is carried up. Vote ties go to the
/// minimum loss; when losses are identical too, one of the tied labels
/// (distinct, sorted ascending) is drawn uniformly from `rng`.
ClassVerdict class_wta(std::span<const GroupVerdict> verdicts, SeededRng& rng);

/// Biased winner-takes-all over the class verdicts. When every class emits
/// the expat label the model answers (expat, n_c, 0); otherwise the expat
/// verdicts are discarded and the contest runs over the remaining labels with
/// the same vote / loss / uniform-random tie-breaking.
ModelVerdict model_output(std::span<const ClassVerdict> verdicts, int expat_id,
                          SeededRng& rng);

/// Complete evaluation record of one input: every per-ANN verdict (linear
/// index order), every group verdict ((i,j) lexicographic), every class
/// verdict, and the model verdict.
struct VerdictTrace {
  std::vector<AnnVerdict> ann;
  std::vector<GroupVerdict> group;
  std::vector<ClassVerdict> cls;
  ModelVerdict model;
};

/// Runs the full pathway on one image. Tie-break randomness is consumed from
/// `rng` in a fixed order: groups (class-major, then group), then classes,
/// then the model level, so traces replay exactly for a given rng state.
VerdictTrace predict_model(const PnwModel& model, ImageView image,
                           SeededRng& rng);

/// Accuracy and per-label confusion counts of a model over a dataset.
/// Row r of `confusion` is ground-truth label r+1; columns are predicted
/// labels 1..n_labels plus one final column for expat outputs. Expat outputs
/// count as errors. An empty dataset reports accuracy NaN with zero counts.
struct EvalResult {
  double accuracy = 0.0;
  Eigen::MatrixX<std::int64_t> confusion;
  std::int64_t expat_outputs = 0;
  std::int64_t total = 0;
  std::int64_t correct = 0;
};

/// Deterministic: each datum draws its tie-break rng from
/// (model seed, datum id), so results are independent of evaluation order.
EvalResult evaluate(const PnwModel& model, const Dataset& ds);

struct TrainConfig {
  SgdConfig sgd;
  GdtConfig gdt;
  int jobs = 1;
};

/// Per-ANN outcome bundled with its load shape, for reporting.
struct AnnTrainRecord {
  AnnIndex index;
  Index home_count = 0;
  Index expat_count = 0;
  GdtReport report;
  Index post_sgd_errors = 0;
};

struct TrainOutcome {
  PnwModel model;
  std::vector<AnnTrainRecord> records;
  EvalResult post_sgd;  // whole-model accuracy after the SGD phase
  EvalResult post_gdt;  // whole-model accuracy after the GDT phase
};

/// Full pipeline: assign loads, SGD-train every ANN, evaluate, GDT-train
/// every ANN to zero per-ANN errors, evaluate again, and verify the model
/// classifies every training datum correctly (FullTrainCheckFailed names the
/// first offending datum otherwise). ANNs train independently on up to
/// cfg.jobs worker threads; results are bit-identical for any job count
/// because every ANN derives its own rng streams from the architecture seed.
TrainOutcome train_model(const Dataset& ds, const PnwArchitecture& arch,
                         const TrainConfig& cfg);

}  // namespace pnw
