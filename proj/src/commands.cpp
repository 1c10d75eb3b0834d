#include "pnw/commands.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "pnw/ensemble.hpp"
#include "pnw/io.hpp"

namespace pnw {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PNW_NUM_JOBS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

// One integer id per line; '#' comments and a non-numeric header line are
// skipped.
std::vector<std::int64_t> read_exclude_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open exclude list " + path);
  std::vector<std::int64_t> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string token;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) token += c;
    if (token.empty()) continue;
    try {
      ids.push_back(std::stoll(token));
    } catch (const std::exception&) {
      if (ids.empty()) continue;  // header line
      fail(ErrorCode::ParseError, path + ": '" + token + "' is not an id");
    }
  }
  return ids;
}

RunConfig load_config(const CliOptions& opts) {
  if (opts.config_path.empty())
    fail(ErrorCode::ParseError, "--config is required");
  RunConfig cfg = parse_run_config(opts.config_path);
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  if (!opts.exclude_ids_path.empty()) {
    const auto extra = read_exclude_file(opts.exclude_ids_path);
    cfg.exclude_ids.insert(cfg.exclude_ids.end(), extra.begin(), extra.end());
  }
  std::sort(cfg.exclude_ids.begin(), cfg.exclude_ids.end());
  cfg.exclude_ids.erase(
      std::unique(cfg.exclude_ids.begin(), cfg.exclude_ids.end()),
      cfg.exclude_ids.end());
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::ParseError, "cannot create " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::ParseError, "cannot write " + path);
  out << text;
}

std::string duplicates_csv(const std::vector<DuplicatePair>& pairs) {
  std::string csv = "id_a,id_b,label_a,label_b\n";
  for (const auto& p : pairs) {
    csv += std::to_string(p.id_a) + "," + std::to_string(p.id_b) + "," +
           std::to_string(p.label_a) + "," + std::to_string(p.label_b) + "\n";
  }
  return csv;
}

ordered_json eval_to_json(const EvalResult& r) {
  ordered_json j;
  j["accuracy"] = r.accuracy;
  j["correct"] = r.correct;
  j["total"] = r.total;
  j["expat_outputs"] = r.expat_outputs;
  return j;
}

// Deterministic training report: everything except wall times, which go to
// the plain-text summary only so report files hash identically across runs.
ordered_json build_report_json(const RunConfig& cfg, const IngestResult& ing,
                               const Dataset& ds, const PnwArchitecture& arch,
                               const TrainOutcome& outcome) {
  ordered_json j;
  j["format"] = "pnw-train-report";
  j["seed"] = cfg.seed;
  j["dataset"] = {{"images", cfg.dataset.images},
                  {"size", ds.size()},
                  {"label_shift", ing.label_shift},
                  {"excluded", static_cast<std::int64_t>(cfg.exclude_ids.size())}};
  std::vector<int> widths;
  for (int i = 0; i < arch.n_classes(); ++i) widths.push_back(arch.output_width(i));
  j["architecture"] = {{"classes", arch.n_classes()},
                       {"groups", arch.n_groups},
                       {"features", arch.n_features()},
                       {"hidden", arch.hidden_nodes},
                       {"labels", arch.n_labels},
                       {"total_anns", arch.total_anns()},
                       {"output_widths", widths}};
  j["post_sgd"] = eval_to_json(outcome.post_sgd);
  j["post_gdt"] = eval_to_json(outcome.post_gdt);

  ordered_json confusion = ordered_json::array();
  for (Index r = 0; r < outcome.post_gdt.confusion.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Index c = 0; c < outcome.post_gdt.confusion.cols(); ++c)
      row.push_back(outcome.post_gdt.confusion(r, c));
    confusion.push_back(row);
  }
  j["confusion_post_gdt"] = confusion;

  ordered_json anns = ordered_json::array();
  for (const auto& rec : outcome.records) {
    anns.push_back({{"ann", {rec.index.class_i, rec.index.group_j, rec.index.feature_k}},
                    {"home", rec.home_count},
                    {"expat", rec.expat_count},
                    {"epochs_sgd", rec.report.epochs_sgd},
                    {"post_sgd_errors", rec.post_sgd_errors},
                    {"rounds_gdt", rec.report.rounds_gdt},
                    {"final_train_errors", rec.report.final_train_errors}});
  }
  j["anns"] = anns;
  return j;
}

std::string build_summary_text(const RunConfig& cfg, const Dataset& ds,
                               const PnwArchitecture& arch,
                               const TrainOutcome& outcome, double wall_total) {
  std::ostringstream os;
  os << "pnw training summary\n";
  os << "dataset: " << cfg.dataset.images << " (" << ds.size() << " images";
  if (!cfg.exclude_ids.empty())
    os << ", " << cfg.exclude_ids.size() << " id(s) excluded";
  os << ")\n";
  os << "architecture: " << arch.n_classes() << "-" << arch.n_groups << "-"
     << arch.n_features() << ", hidden " << arch.hidden_nodes << ", "
     << arch.total_anns() << " ANN(s)\n";
  os << std::fixed << std::setprecision(6);
  os << "post-SGD training accuracy: " << outcome.post_sgd.accuracy << "\n";
  os << "post-GDT training accuracy: " << outcome.post_gdt.accuracy << "\n";
  os << std::setprecision(2);
  os << "total training wall time: " << wall_total << " s\n";
  os << "per-ANN:\n";
  for (const auto& rec : outcome.records) {
    os << "  (" << rec.index.class_i << "," << rec.index.group_j << ","
       << rec.index.feature_k << ") home=" << rec.home_count
       << " expat=" << rec.expat_count << " sgd_epochs=" << rec.report.epochs_sgd
       << " post_sgd_errors=" << rec.post_sgd_errors
       << " gdt_rounds=" << rec.report.rounds_gdt
       << " wall=" << rec.report.wall_time << "s\n";
  }
  return os.str();
}

void print_confusion(const EvalResult& result, int n_labels) {
  std::cout << "confusion (rows: truth 1.." << n_labels
            << "; cols: predicted 1.." << n_labels << ", expat):\n";
  for (Index r = 0; r < result.confusion.rows(); ++r) {
    std::cout << "  " << (r + 1) << ":";
    for (Index c = 0; c < result.confusion.cols(); ++c)
      std::cout << " " << result.confusion(r, c);
    std::cout << "\n";
  }
}

struct LoadedEvalData {
  Checkpoint ckpt;
  RunConfig embedded;
  IngestResult ing;
  Dataset ds;
};

LoadedEvalData load_eval_data(const CliOptions& opts) {
  if (opts.checkpoint_path.empty())
    fail(ErrorCode::ParseError, "--checkpoint is required");
  LoadedEvalData data{load_checkpoint(opts.checkpoint_path), {}, {}, {}};
  try {
    data.embedded = parse_run_config_json(json::parse(data.ckpt.config_json));
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError,
         std::string("checkpoint config echo: ") + e.what());
  }

  RunConfig source = data.embedded;
  if (!opts.config_path.empty()) {
    CliOptions sub = opts;
    source = load_config(sub);
  }
  data.ing = ingest(source.dataset.images, source.dataset.labels,
                    dataset_format_from_string(source.dataset.format),
                    source.dataset.labels_one_based, data.embedded.n_labels);
  data.ds = data.ing.dataset.without_ids(source.exclude_ids);

  // The dataset must be compatible with every feature slot, and the slots
  // with the checkpointed networks.
  PnwArchitecture& arch = data.ckpt.model.arch;
  resolve_feature_dims(arch, data.ds.shape());
  for (int k = 0; k < arch.n_features(); ++k) {
    for (int i = 0; i < arch.n_classes(); ++i) {
      for (int g = 0; g < arch.n_groups; ++g) {
        const Ann& ann = data.ckpt.model.ann(i, g, k);
        if (ann.input_size() != arch.input_dim(k)) {
          fail(ErrorCode::ShapeMismatch,
               std::string("feature ") + std::to_string(k) + " (" +
                   feature_kind_name(arch.feature_specs[static_cast<std::size_t>(k)].kind) +
                   ") yields " + std::to_string(arch.input_dim(k)) +
                   " values for this dataset, checkpoint ANN expects " +
                   std::to_string(ann.input_size()));
        }
      }
    }
  }
  if (opts.seed_override) arch.seed = *opts.seed_override;
  return data;
}

}  // namespace

int exit_code_for(const Error& error) {
  switch (error.code()) {
    case ErrorCode::DoubleLabelDetected:
      return 2;
    case ErrorCode::RoundLimitExceeded:
    case ErrorCode::FullTrainCheckFailed:
      return 3;
    default:
      return 1;
  }
}

int run_audit(const CliOptions& opts) {
  const RunConfig cfg = load_config(opts);
  const IngestResult ing =
      ingest(cfg.dataset.images, cfg.dataset.labels,
             dataset_format_from_string(cfg.dataset.format),
             cfg.dataset.labels_one_based, cfg.n_labels);
  const auto all_pairs = detect_double_labels(ing.dataset);
  const Dataset ds = ing.dataset.without_ids(cfg.exclude_ids);
  const auto pairs = detect_double_labels(ds);

  ensure_dir(cfg.output_dir);
  const std::string csv_path = cfg.output_dir + "/duplicates.csv";
  write_text(csv_path, duplicates_csv(pairs));

  std::cout << "audited " << ds.size() << " image(s)";
  if (!cfg.exclude_ids.empty())
    std::cout << " (" << ing.dataset.size() - ds.size() << " excluded by id)";
  std::cout << "\n";
  for (const auto& p : pairs) {
    std::cout << "double-labeled: ids {" << p.id_a << "," << p.id_b
              << "} labels {" << p.label_a << "," << p.label_b << "}\n";
  }
  if (pairs.empty()) {
    std::cout << "no double-labeled images";
    if (all_pairs.size() > pairs.size())
      std::cout << " (" << all_pairs.size()
                << " pair(s) resolved by the exclusion list)";
    std::cout << "\n";
  } else {
    std::cout << pairs.size() << " double-labeled pair(s), report in "
              << csv_path << "\n";
  }
  return pairs.empty() ? 0 : 2;
}

int run_train(const CliOptions& opts) {
  RunConfig cfg = load_config(opts);
  const IngestResult ing =
      ingest(cfg.dataset.images, cfg.dataset.labels,
             dataset_format_from_string(cfg.dataset.format),
             cfg.dataset.labels_one_based, cfg.n_labels);
  const Dataset ds = ing.dataset.without_ids(cfg.exclude_ids);

  const auto pairs = detect_double_labels(ds);
  if (!pairs.empty()) {
    std::cout << "refusing to train: " << pairs.size()
              << " double-labeled pair(s) in the dataset; run `pnw audit` and "
                 "exclude or fix them first\n";
    for (const auto& p : pairs)
      std::cout << "  ids {" << p.id_a << "," << p.id_b << "} labels {"
                << p.label_a << "," << p.label_b << "}\n";
    return 2;
  }

  PnwArchitecture arch = cfg.architecture();
  resolve_feature_dims(arch, ds.shape());
  validate_architecture(arch);
  cfg.features = arch.feature_specs;  // echo resolved dims into the config

  TrainConfig train_cfg{cfg.sgd, cfg.gdt, resolve_jobs(opts.jobs)};
  const auto t0 = std::chrono::steady_clock::now();
  const TrainOutcome outcome = train_model(ds, arch, train_cfg);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  ensure_dir(cfg.output_dir);
  const ordered_json report = build_report_json(cfg, ing, ds, arch, outcome);
  const std::string report_text = report.dump(2) + "\n";

  Checkpoint ckpt;
  ckpt.config_json = run_config_to_json(cfg).dump(2);
  ckpt.model = outcome.model;
  ckpt.reports_json = report_text;
  save_checkpoint(cfg.output_dir + "/checkpoint.pnw", ckpt);
  write_text(cfg.output_dir + "/report.json", report_text);
  write_text(cfg.output_dir + "/summary.txt",
             build_summary_text(cfg, ds, arch, outcome, wall));

  std::cout << std::fixed << std::setprecision(6)
            << "post-SGD training accuracy: " << outcome.post_sgd.accuracy
            << "\npost-GDT training accuracy: " << outcome.post_gdt.accuracy
            << "\ncheckpoint: " << cfg.output_dir << "/checkpoint.pnw\n";
  return 0;
}

int run_eval(const CliOptions& opts) {
  LoadedEvalData data = load_eval_data(opts);
  const PnwModel& model = data.ckpt.model;
  const EvalResult result = evaluate(model, data.ds);

  std::cout << std::fixed << std::setprecision(6)
            << "accuracy: " << result.accuracy << " (" << result.correct << "/"
            << result.total << ")\n"
            << "expat outputs: " << result.expat_outputs << "\n";
  print_confusion(result, model.arch.n_labels);

  if (opts.trace) {
    const PnwArchitecture& arch = model.arch;
    for (Index d = 0; d < data.ds.size(); ++d) {
      SeededRng rng(derive_seed(arch.seed, seed_stream::kEvalTie,
                                static_cast<std::uint64_t>(data.ds.id(d))));
      const VerdictTrace trace = predict_model(model, data.ds.image(d), rng);
      std::cout << "datum id=" << data.ds.id(d) << " truth=" << data.ds.label(d)
                << "\n";
      for (int i = 0; i < arch.n_classes(); ++i)
        for (int j = 0; j < arch.n_groups; ++j)
          for (int k = 0; k < arch.n_features(); ++k) {
            const auto& v = trace.ann[static_cast<std::size_t>(
                arch.ann_linear_index(i, j, k))];
            std::cout << "  ann (" << i << "," << j << "," << k
                      << "): label=" << v.label << " loss=" << v.loss << "\n";
          }
      for (int i = 0; i < arch.n_classes(); ++i)
        for (int j = 0; j < arch.n_groups; ++j) {
          const auto& v = trace.group[static_cast<std::size_t>(i * arch.n_groups + j)];
          std::cout << "  group (" << i << "," << j << "): label=" << v.label
                    << " votes=" << v.votes << " loss=" << v.loss << "\n";
        }
      for (int i = 0; i < arch.n_classes(); ++i) {
        const auto& v = trace.cls[static_cast<std::size_t>(i)];
        std::cout << "  class " << i << ": label=" << v.label
                  << " votes=" << v.votes << " loss=" << v.loss << "\n";
      }
      std::cout << "  model: label=" << trace.model.label
                << " votes=" << trace.model.votes << " loss=" << trace.model.loss
                << "\n";
    }
  }
  return 0;
}

int run_inspect(const CliOptions& opts) {
  if (opts.checkpoint_path.empty())
    fail(ErrorCode::ParseError, "--checkpoint is required");
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint_path);
  const PnwArchitecture& arch = ckpt.model.arch;

  std::cout << "checkpoint version: " << ckpt.version << "\n";
  std::cout << "architecture: " << arch.n_classes() << "-" << arch.n_groups
            << "-" << arch.n_features() << ", hidden " << arch.hidden_nodes
            << ", labels " << arch.n_labels << ", " << arch.total_anns()
            << " ANN(s)\n";
  std::int64_t total_params = 0;
  for (const Ann& ann : ckpt.model.anns)
    total_params +=
        param_count(ann.input_size(), ann.hidden_size(), ann.output_size());
  std::cout << "total parameters: " << total_params << "\n";
  for (int i = 0; i < arch.n_classes(); ++i) {
    std::cout << "class " << i << ": labels {";
    const auto& labels = arch.partition.classes[static_cast<std::size_t>(i)];
    for (std::size_t p = 0; p < labels.size(); ++p)
      std::cout << (p ? "," : "") << labels[p];
    std::cout << "}, output width " << arch.output_width(i) << "\n";
  }
  for (int k = 0; k < arch.n_features(); ++k) {
    const auto& spec = arch.feature_specs[static_cast<std::size_t>(k)];
    std::cout << "feature " << k << ": " << feature_kind_name(spec.kind);
    if (spec.kind == FeatureKind::ChannelSelect)
      std::cout << " " << (spec.channel == 0 ? "R" : spec.channel == 1 ? "G" : "B");
    if (spec.reduce) std::cout << " reduced";
    std::cout << ", " << spec.output_dims << " values\n";
  }
  std::cout << "embedded report:\n" << ckpt.reports_json;
  return 0;
}

}  // namespace pnw
