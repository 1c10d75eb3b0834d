#include "pnw/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <numeric>
#include <string>
#include <unordered_map>

#include "pnw/features.hpp"

namespace pnw {

namespace {

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void fisher_yates(std::vector<Index>& v, SeededRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(v[i - 1], v[j]);
  }
}

// Index of the output node whose one-hot is nearest to column `c` of Y,
// lowest index on exact ties. Mirrors nearest_one_hot.
Index nearest_node_col(const Eigen::MatrixXd& y, Index c) {
  Index best = 0;
  double best_d = 0;
  for (Index t = 0; t < y.rows(); ++t) {
    double d = 0;
    for (Index j = 0; j < y.rows(); ++j) {
      const double e = y(j, c) - (j == t ? 1.0 : 0.0);
      d += e * e;
    }
    if (t == 0 || d < best_d) {
      best = t;
      best_d = d;
    }
  }
  return best;
}

struct LoadScan {
  std::vector<char> correct;
  Eigen::VectorXd loss;
  Index errors = 0;
};

// Batched classification scan of the whole load. Used to steer training;
// termination decisions always re-check with count_load_errors.
LoadScan scan_load(const Ann& ann, const TrainingLoad& load) {
  const Index n = load.size();
  LoadScan scan;
  scan.correct.assign(static_cast<std::size_t>(n), 0);
  scan.loss.resize(n);

  constexpr Index kChunk = 512;
  Eigen::MatrixXd h, y;
  for (Index start = 0; start < n; start += kChunk) {
    const Index count = std::min(kChunk, n - start);
    const auto x = load.inputs.middleCols(start, count);
    h = ((ann.w1 * x).colwise() + ann.b1).array().tanh().matrix();
    y = ((ann.w2 * h).colwise() + ann.b2);
    y = (1.0 / (1.0 + (-y.array()).exp())).matrix();
    for (Index c = 0; c < count; ++c) {
      const Index s = start + c;
      const Index target = load.targets[static_cast<std::size_t>(s)];
      const Index got = nearest_node_col(y, c);
      scan.loss[s] = one_hot_distance(y.col(c), target);
      if (got == target) {
        scan.correct[static_cast<std::size_t>(s)] = 1;
      } else {
        ++scan.errors;
      }
    }
  }
  return scan;
}

// One mini-batch descent pass over the samples listed in `order`.
// delta_fn(sample, E_col, Y_col) -> output-layer delta for that sample.
template <typename DeltaFn>
void descent_pass(Ann& ann, const TrainingLoad& load,
                  const std::vector<Index>& order, int batch_size, double rate,
                  double momentum, AnnGradient* velocity, DeltaFn delta_fn) {
  const Index n = static_cast<Index>(order.size());
  const Index dim = ann.input_size();
  Eigen::MatrixXd xb(dim, std::min<Index>(batch_size, n));
  Eigen::MatrixXd h, y, d2, d1;

  for (Index start = 0; start < n; start += batch_size) {
    const Index count = std::min<Index>(batch_size, n - start);
    xb.resize(dim, count);
    for (Index c = 0; c < count; ++c)
      xb.col(c) = load.inputs.col(order[static_cast<std::size_t>(start + c)]);

    h = ((ann.w1 * xb).colwise() + ann.b1).array().tanh().matrix();
    y = ((ann.w2 * h).colwise() + ann.b2);
    y = (1.0 / (1.0 + (-y.array()).exp())).matrix();

    d2.resize(y.rows(), count);
    for (Index c = 0; c < count; ++c) {
      const Index s = order[static_cast<std::size_t>(start + c)];
      Eigen::VectorXd e = y.col(c);
      e[load.targets[static_cast<std::size_t>(s)]] -= 1.0;
      d2.col(c) = delta_fn(s, e, y.col(c));
    }
    d1 = ((ann.w2.transpose() * d2).array() * (1.0 - h.array().square()))
             .matrix();

    const double inv = 1.0 / static_cast<double>(count);
    if (momentum != 0.0 && velocity != nullptr) {
      velocity->w2 = momentum * velocity->w2 - rate * inv * (d2 * h.transpose());
      velocity->b2 = momentum * velocity->b2 - rate * inv * d2.rowwise().sum();
      velocity->w1 = momentum * velocity->w1 - rate * inv * (d1 * xb.transpose());
      velocity->b1 = momentum * velocity->b1 - rate * inv * d1.rowwise().sum();
      ann.w2 += velocity->w2;
      ann.b2 += velocity->b2;
      ann.w1 += velocity->w1;
      ann.b1 += velocity->b1;
    } else {
      ann.w2.noalias() -= rate * inv * (d2 * h.transpose());
      ann.b2.noalias() -= rate * inv * d2.rowwise().sum();
      ann.w1.noalias() -= rate * inv * (d1 * xb.transpose());
      ann.b1.noalias() -= rate * inv * d1.rowwise().sum();
    }
  }
}

}  // namespace

std::vector<DuplicatePair> detect_double_labels(const Dataset& ds) {
  std::unordered_map<std::uint64_t, std::vector<Index>> buckets;
  buckets.reserve(static_cast<std::size_t>(ds.size()));
  for (Index i = 0; i < ds.size(); ++i) {
    const auto view = ds.image(i);
    buckets[fnv1a(view.bytes.data(), view.bytes.size())].push_back(i);
  }

  std::vector<DuplicatePair> pairs;
  for (const auto& [hash, members] : buckets) {
    if (members.size() < 2) continue;
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const Index ia = members[a];
        const Index ib = members[b];
        if (ds.label(ia) == ds.label(ib)) continue;
        const auto va = ds.image(ia);
        const auto vb = ds.image(ib);
        if (std::memcmp(va.bytes.data(), vb.bytes.data(), va.bytes.size()) != 0)
          continue;
        DuplicatePair p;
        if (ds.id(ia) <= ds.id(ib)) {
          p = {ds.id(ia), ds.id(ib), ds.label(ia), ds.label(ib)};
        } else {
          p = {ds.id(ib), ds.id(ia), ds.label(ib), ds.label(ia)};
        }
        pairs.push_back(p);
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
    return std::tie(x.id_a, x.id_b) < std::tie(y.id_a, y.id_b);
  });
  return pairs;
}

std::vector<TrainingLoad> assign_loads(const Dataset& ds,
                                       const PnwArchitecture& arch,
                                       SeededRng& rng) {
  validate_architecture(arch);
  const int n_c = arch.n_classes();
  const int n_g = arch.n_groups;
  const int n_f = arch.n_features();

  // Datum -> owning class, preserving dataset order within each class.
  std::vector<std::vector<Index>> class_members(static_cast<std::size_t>(n_c));
  for (Index i = 0; i < ds.size(); ++i)
    class_members[static_cast<std::size_t>(class_of_label(arch, ds.label(i)))]
        .push_back(i);
  for (int i = 0; i < n_c; ++i) {
    if (class_members[static_cast<std::size_t>(i)].empty())
      fail(ErrorCode::EmptyClass, "class " + std::to_string(i) + " received no data");
  }

  // Home groups by contiguous chunking.
  std::vector<std::vector<std::vector<Index>>> home(
      static_cast<std::size_t>(n_c),
      std::vector<std::vector<Index>>(static_cast<std::size_t>(n_g)));
  for (int i = 0; i < n_c; ++i) {
    const auto& members = class_members[static_cast<std::size_t>(i)];
    const Index chunk =
        (static_cast<Index>(members.size()) + n_g - 1) / n_g;  // ceil
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto j = static_cast<std::size_t>(static_cast<Index>(m) / chunk);
      home[static_cast<std::size_t>(i)][j].push_back(members[m]);
    }
  }

  // Node index of each ground-truth label within its class's output layer.
  std::vector<std::unordered_map<int, Index>> node_of(
      static_cast<std::size_t>(n_c));
  for (int i = 0; i < n_c; ++i) {
    const auto& labels = arch.partition.classes[static_cast<std::size_t>(i)];
    for (std::size_t p = 0; p < labels.size(); ++p)
      node_of[static_cast<std::size_t>(i)][labels[p]] = static_cast<Index>(p);
  }

  std::vector<TrainingLoad> loads(static_cast<std::size_t>(arch.total_anns()));
  for (int i = 0; i < n_c; ++i) {
    const Index expat_node =
        static_cast<Index>(arch.partition.classes[static_cast<std::size_t>(i)].size());
    for (int j = 0; j < n_g; ++j) {
      const auto& home_ids = home[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

      // Expat draw, shared by the group's n_f ANNs.
      std::vector<Index> expat_ids;
      if (n_c >= 2 && !home_ids.empty()) {
        std::vector<std::vector<Index>> pools;
        for (int ii = 0; ii < n_c; ++ii)
          for (int jj = 0; jj < n_g; ++jj)
            if (ii != i || jj != j)
              pools.push_back(home[static_cast<std::size_t>(ii)]
                                  [static_cast<std::size_t>(jj)]);
        const std::size_t need = home_ids.size();
        std::size_t cell = 0;
        std::size_t exhausted_streak = 0;
        while (expat_ids.size() < need && exhausted_streak < pools.size()) {
          auto& pool = pools[cell % pools.size()];
          ++cell;
          if (pool.empty()) {
            ++exhausted_streak;
            continue;
          }
          exhausted_streak = 0;
          const std::size_t r = rng.uniform_index(pool.size());
          expat_ids.push_back(pool[r]);
          pool[r] = pool.back();
          pool.pop_back();
        }
      }

      for (int k = 0; k < n_f; ++k) {
        TrainingLoad& load = loads[static_cast<std::size_t>(arch.ann_linear_index(i, j, k))];
        load.index = {i, j, k};
        load.home_count = static_cast<Index>(home_ids.size());
        load.expat_count = static_cast<Index>(expat_ids.size());
        const Index total = load.home_count + load.expat_count;
        const auto& spec = arch.feature_specs[static_cast<std::size_t>(k)];
        load.inputs.resize(arch.input_dim(k), total);
        load.targets.reserve(static_cast<std::size_t>(total));
        load.sample_ids.reserve(static_cast<std::size_t>(total));
        Index col = 0;
        for (Index idx : home_ids) {
          load.inputs.col(col++) = apply_feature(spec, ds.image(idx));
          load.targets.push_back(
              node_of[static_cast<std::size_t>(i)].at(ds.label(idx)));
          load.sample_ids.push_back(ds.id(idx));
        }
        for (Index idx : expat_ids) {
          load.inputs.col(col++) = apply_feature(spec, ds.image(idx));
          load.targets.push_back(expat_node);
          load.sample_ids.push_back(ds.id(idx));
        }
      }
    }
  }
  return loads;
}

Index count_load_errors(const Ann& ann, const TrainingLoad& load) {
  Index errors = 0;
  for (Index s = 0; s < load.size(); ++s) {
    const Eigen::VectorXd y = forward(ann, load.inputs.col(s));
    if (nearest_node(y) != load.targets[static_cast<std::size_t>(s)]) ++errors;
  }
  return errors;
}

SgdResult sgd_train(Ann& ann, const TrainingLoad& load, const SgdConfig& cfg,
                    SeededRng& rng) {
  const Index n = load.size();
  if (n == 0) return {0, 0};

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  AnnGradient velocity;
  if (cfg.momentum != 0.0) {
    velocity.w1 = Eigen::MatrixXd::Zero(ann.w1.rows(), ann.w1.cols());
    velocity.b1 = Eigen::VectorXd::Zero(ann.b1.size());
    velocity.w2 = Eigen::MatrixXd::Zero(ann.w2.rows(), ann.w2.cols());
    velocity.b2 = Eigen::VectorXd::Zero(ann.b2.size());
  }

  auto plain_delta = [](Index, const Eigen::VectorXd& e,
                        const Eigen::Ref<const Eigen::VectorXd>& y) {
    return Eigen::VectorXd(2.0 * e.array() * y.array() * (1.0 - y.array()));
  };

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    fisher_yates(order, rng);
    descent_pass(ann, load, order, cfg.batch_size, cfg.rate, cfg.momentum,
                 &velocity, plain_delta);
    if (scan_load(ann, load).errors == 0) {
      const Index exact = count_load_errors(ann, load);
      if (exact == 0) return {epoch, 0};
    }
  }
  return {cfg.max_epochs, count_load_errors(ann, load)};
}

GdtReport gdt_train(Ann& ann, const TrainingLoad& load, const GdtConfig& cfg,
                    SeededRng& rng) {
  const auto t0 = std::chrono::steady_clock::now();
  GdtReport report;

  // A load with two byte-identical feature vectors and different targets can
  // never reach zero errors; refuse it up front.
  {
    std::unordered_map<std::uint64_t, std::vector<Index>> buckets;
    for (Index s = 0; s < load.size(); ++s) {
      const auto* bytes =
          reinterpret_cast<const std::uint8_t*>(load.inputs.col(s).data());
      buckets[fnv1a(bytes, sizeof(double) * static_cast<std::size_t>(
                               load.inputs.rows()))]
          .push_back(s);
    }
    std::vector<std::pair<std::int64_t, std::int64_t>> clashes;
    for (const auto& [hash, members] : buckets) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          const Index sa = members[a];
          const Index sb = members[b];
          if (load.targets[static_cast<std::size_t>(sa)] ==
              load.targets[static_cast<std::size_t>(sb)])
            continue;
          if (load.inputs.col(sa) != load.inputs.col(sb)) continue;
          clashes.emplace_back(load.sample_ids[static_cast<std::size_t>(sa)],
                               load.sample_ids[static_cast<std::size_t>(sb)]);
        }
      }
    }
    if (!clashes.empty()) {
      std::sort(clashes.begin(), clashes.end());
      std::string what = "load of ANN (" + std::to_string(load.index.class_i) +
                         "," + std::to_string(load.index.group_j) + "," +
                         std::to_string(load.index.feature_k) +
                         ") contains contradictory duplicates:";
      const std::size_t shown = std::min<std::size_t>(clashes.size(), 8);
      for (std::size_t i = 0; i < shown; ++i)
        what += " {" + std::to_string(clashes[i].first) + "," +
                std::to_string(clashes[i].second) + "}";
      if (clashes.size() > shown)
        what += " and " + std::to_string(clashes.size() - shown) + " more";
      throw DoubleLabelError(what, std::move(clashes));
    }
  }

  if (load.size() == 0 || count_load_errors(ann, load) == 0) {
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return report;  // already error-free, zero rounds
  }

  double guard = cfg.guard_loss;
  Index best_errors = load.size() + 1;
  int stagnant = 0;
  std::vector<Index> focus;
  std::vector<char> wrong(static_cast<std::size_t>(load.size()), 0);

  for (;;) {
    const LoadScan scan = scan_load(ann, load);
    if (scan.errors == 0 && count_load_errors(ann, load) == 0) break;

    if (report.rounds_gdt >= cfg.max_rounds) {
      std::vector<std::int64_t> residual;
      for (Index s = 0; s < load.size(); ++s) {
        const Eigen::VectorXd y = forward(ann, load.inputs.col(s));
        if (nearest_node(y) != load.targets[static_cast<std::size_t>(s)])
          residual.push_back(load.sample_ids[static_cast<std::size_t>(s)]);
      }
      throw RoundLimitError(
          "ANN (" + std::to_string(load.index.class_i) + "," +
              std::to_string(load.index.group_j) + "," +
              std::to_string(load.index.feature_k) + ") still misclassifies " +
              std::to_string(residual.size()) + " sample(s) after " +
              std::to_string(cfg.max_rounds) + " rounds",
          std::move(residual));
    }
    ++report.rounds_gdt;

    // Focused set: every misclassified sample, plus correct samples whose
    // loss has not yet been pushed under the guard.
    focus.clear();
    for (Index s = 0; s < load.size(); ++s) {
      const bool ok = scan.correct[static_cast<std::size_t>(s)] != 0;
      wrong[static_cast<std::size_t>(s)] = ok ? 0 : 1;
      if (!ok || scan.loss[s] > guard) focus.push_back(s);
    }
    fisher_yates(focus, rng);

    auto tunneling_delta = [&](Index s, const Eigen::VectorXd& e,
                               const Eigen::Ref<const Eigen::VectorXd>& y) {
      if (wrong[static_cast<std::size_t>(s)])
        return Eigen::VectorXd(cfg.boost * e);  // de-saturated, boosted
      return Eigen::VectorXd(2.0 * e.array() * y.array() * (1.0 - y.array()));
    };
    descent_pass(ann, load, focus, cfg.batch_size, cfg.rate, 0.0, nullptr,
                 tunneling_delta);

    if (scan.errors < best_errors) {
      best_errors = scan.errors;
      stagnant = 0;
    } else if (++stagnant >= cfg.patience) {
      guard *= cfg.tighten;
      stagnant = 0;
    }
  }

  report.final_train_errors = 0;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

}  // namespace pnw
