#include "pnw/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "pnw/features.hpp"

namespace pnw {

namespace {

// Uniform choice among tied labels: candidates are distinct labels sorted
// ascending, one rng draw, none when a single label remains. Both voting
// stages share this rule so seeded traces replay exactly.
int pick_tied_label(std::vector<int>& labels, SeededRng& rng) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.size() == 1) return labels.front();
  return labels[rng.uniform_index(labels.size())];
}

// Shared winner-takes-all core: max votes, then min loss, then uniform random
// among the remaining distinct labels.
GroupVerdict winner_takes_all(std::span<const GroupVerdict> verdicts,
                              SeededRng& rng) {
  int max_votes = 0;
  for (const auto& v : verdicts) max_votes = std::max(max_votes, v.votes);

  double min_loss = std::numeric_limits<double>::infinity();
  for (const auto& v : verdicts)
    if (v.votes == max_votes) min_loss = std::min(min_loss, v.loss);

  std::vector<int> tied;
  for (const auto& v : verdicts)
    if (v.votes == max_votes && v.loss == min_loss) tied.push_back(v.label);

  return GroupVerdict{pick_tied_label(tied, rng), max_votes, min_loss};
}

}  // namespace

GroupVerdict group_vote(std::span<const AnnVerdict> verdicts, SeededRng& rng) {
  if (verdicts.empty()) fail(ErrorCode::ZeroDimension, "group_vote over no verdicts");

  // Per label: vote count and the smallest loss among its voters.
  std::map<int, std::pair<int, double>> tally;
  for (const auto& v : verdicts) {
    auto [it, fresh] = tally.try_emplace(v.label, 1, v.loss);
    if (!fresh) {
      it->second.first += 1;
      it->second.second = std::min(it->second.second, v.loss);
    }
  }

  int mode = 0;
  for (const auto& [label, entry] : tally) mode = std::max(mode, entry.first);

  double min_loss = std::numeric_limits<double>::infinity();
  for (const auto& [label, entry] : tally)
    if (entry.first == mode) min_loss = std::min(min_loss, entry.second);

  std::vector<int> tied;
  for (const auto& [label, entry] : tally)
    if (entry.first == mode && entry.second == min_loss) tied.push_back(label);

  const int winner = pick_tied_label(tied, rng);
  return GroupVerdict{winner, mode, tally.at(winner).second};
}

ClassVerdict class_wta(std::span<const GroupVerdict> verdicts, SeededRng& rng) {
  if (verdicts.empty()) fail(ErrorCode::ZeroDimension, "class_wta over no verdicts");
  return winner_takes_all(verdicts, rng);
}

ModelVerdict model_output(std::span<const ClassVerdict> verdicts, int expat_id,
                          SeededRng& rng) {
  if (verdicts.empty()) fail(ErrorCode::ZeroDimension, "model_output over no verdicts");

  std::vector<ClassVerdict> contenders;
  contenders.reserve(verdicts.size());
  for (const auto& v : verdicts)
    if (v.label != expat_id) contenders.push_back(v);

  if (contenders.empty()) {
    // All classes disown the datum.
    return ModelVerdict{expat_id, static_cast<int>(verdicts.size()), 0.0};
  }
  return winner_takes_all(contenders, rng);
}

VerdictTrace predict_model(const PnwModel& model, ImageView image,
                           SeededRng& rng) {
  const PnwArchitecture& arch = model.arch;
  const int n_c = arch.n_classes();
  const int n_g = arch.n_groups;
  const int n_f = arch.n_features();

  // Each feature vector is shared by the n_c * n_g ANNs of its slot.
  std::vector<Eigen::VectorXd> features;
  features.reserve(static_cast<std::size_t>(n_f));
  for (int k = 0; k < n_f; ++k)
    features.push_back(
        apply_feature(arch.feature_specs[static_cast<std::size_t>(k)], image));

  VerdictTrace trace;
  trace.ann.resize(static_cast<std::size_t>(arch.total_anns()));
  for (int i = 0; i < n_c; ++i)
    for (int j = 0; j < n_g; ++j)
      for (int k = 0; k < n_f; ++k)
        trace.ann[static_cast<std::size_t>(arch.ann_linear_index(i, j, k))] =
            predict(model.ann(i, j, k), features[static_cast<std::size_t>(k)]);

  trace.group.reserve(static_cast<std::size_t>(n_c * n_g));
  for (int i = 0; i < n_c; ++i) {
    for (int j = 0; j < n_g; ++j) {
      const auto* first =
          &trace.ann[static_cast<std::size_t>(arch.ann_linear_index(i, j, 0))];
      trace.group.push_back(
          group_vote({first, static_cast<std::size_t>(n_f)}, rng));
    }
  }

  trace.cls.reserve(static_cast<std::size_t>(n_c));
  for (int i = 0; i < n_c; ++i) {
    const auto* first = &trace.group[static_cast<std::size_t>(i * n_g)];
    trace.cls.push_back(class_wta({first, static_cast<std::size_t>(n_g)}, rng));
  }

  trace.model =
      model_output(trace.cls, arch.label_space().expat_id(), rng);
  return trace;
}

EvalResult evaluate(const PnwModel& model, const Dataset& ds) {
  const int n_labels = model.arch.n_labels;
  const int expat_id = model.arch.label_space().expat_id();

  EvalResult result;
  result.confusion =
      Eigen::MatrixX<std::int64_t>::Zero(n_labels, n_labels + 1);
  result.total = ds.size();
  if (ds.empty()) {
    result.accuracy = std::numeric_limits<double>::quiet_NaN();
    return result;
  }

  for (Index d = 0; d < ds.size(); ++d) {
    SeededRng rng(derive_seed(model.arch.seed, seed_stream::kEvalTie,
                              static_cast<std::uint64_t>(ds.id(d))));
    const VerdictTrace trace = predict_model(model, ds.image(d), rng);
    const int truth = ds.label(d);
    const int predicted = trace.model.label;
    const int col = (predicted == expat_id) ? n_labels : predicted - 1;
    result.confusion(truth - 1, col) += 1;
    if (predicted == expat_id) ++result.expat_outputs;
    if (predicted == truth) ++result.correct;
  }
  result.accuracy =
      static_cast<double>(result.correct) / static_cast<double>(result.total);
  return result;
}

namespace {

// Runs fn(t) for t in [0, count) on up to `jobs` threads. The first exception
// wins; remaining work is drained without running.
void parallel_for_each(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::clamp(jobs, 1, std::max(1, count));
  if (jobs == 1) {
    for (int t = 0; t < count; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const int t = next.fetch_add(1);
        if (t >= count || failed.load()) return;
        try {
          fn(t);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& worker : workers) worker.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

TrainOutcome train_model(const Dataset& ds, const PnwArchitecture& arch,
                         const TrainConfig& cfg) {
  validate_architecture(arch);

  SeededRng assign_rng(derive_seed(arch.seed, seed_stream::kExpatDraw));
  std::vector<TrainingLoad> loads = assign_loads(ds, arch, assign_rng);

  TrainOutcome outcome;
  outcome.model.arch = arch;
  outcome.model.anns.resize(static_cast<std::size_t>(arch.total_anns()));
  outcome.records.resize(static_cast<std::size_t>(arch.total_anns()));

  const int n_anns = arch.total_anns();
  for (int t = 0; t < n_anns; ++t) {
    const TrainingLoad& load = loads[static_cast<std::size_t>(t)];
    SeededRng init_rng(derive_seed(arch.seed, seed_stream::kAnnInit,
                                   static_cast<std::uint64_t>(t)));
    outcome.model.anns[static_cast<std::size_t>(t)] =
        init_ann(arch.input_dim(load.index.feature_k), arch.hidden_nodes,
                 arch.label_map(load.index.class_i), init_rng);
    auto& record = outcome.records[static_cast<std::size_t>(t)];
    record.index = load.index;
    record.home_count = load.home_count;
    record.expat_count = load.expat_count;
  }

  parallel_for_each(n_anns, cfg.jobs, [&](int t) {
    const auto ti = static_cast<std::size_t>(t);
    const auto t0 = std::chrono::steady_clock::now();
    SeededRng sgd_rng(derive_seed(arch.seed, seed_stream::kSgdShuffle,
                                  static_cast<std::uint64_t>(t)));
    const SgdResult sgd =
        sgd_train(outcome.model.anns[ti], loads[ti], cfg.sgd, sgd_rng);
    auto& record = outcome.records[ti];
    record.report.epochs_sgd = sgd.epochs;
    record.post_sgd_errors = sgd.errors;
    record.report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  });

  outcome.post_sgd = evaluate(outcome.model, ds);

  parallel_for_each(n_anns, cfg.jobs, [&](int t) {
    const auto ti = static_cast<std::size_t>(t);
    SeededRng gdt_rng(derive_seed(arch.seed, seed_stream::kGdtShuffle,
                                  static_cast<std::uint64_t>(t)));
    const GdtReport gdt =
        gdt_train(outcome.model.anns[ti], loads[ti], cfg.gdt, gdt_rng);
    auto& record = outcome.records[ti];
    record.report.rounds_gdt = gdt.rounds_gdt;
    record.report.final_train_errors = gdt.final_train_errors;
    record.report.wall_time += gdt.wall_time;
  });

  outcome.post_gdt = evaluate(outcome.model, ds);

  if (outcome.post_gdt.correct != outcome.post_gdt.total) {
    // Every ANN is error-free on its own load, yet the assembled verdict
    // pathway got some training datum wrong. Name the first one.
    for (Index d = 0; d < ds.size(); ++d) {
      SeededRng rng(derive_seed(arch.seed, seed_stream::kEvalTie,
                                static_cast<std::uint64_t>(ds.id(d))));
      const VerdictTrace trace = predict_model(outcome.model, ds.image(d), rng);
      if (trace.model.label != ds.label(d)) {
        std::string chain;
        for (std::size_t i = 0; i < trace.cls.size(); ++i) {
          chain += " class " + std::to_string(i) + "=(" +
                   std::to_string(trace.cls[i].label) + ", v" +
                   std::to_string(trace.cls[i].votes) + ", " +
                   std::to_string(trace.cls[i].loss) + ")";
        }
        fail(ErrorCode::FullTrainCheckFailed,
             "datum id " + std::to_string(ds.id(d)) + " (label " +
                 std::to_string(ds.label(d)) + ") predicted as " +
                 std::to_string(trace.model.label) + " with " +
                 std::to_string(trace.model.votes) + " vote(s), loss " +
                 std::to_string(trace.model.loss) + ";" + chain);
      }
    }
  }
  return outcome;
}

}  // namespace pnw
