#include <fstream>
#include <string>

#include "pnw/io.hpp"

namespace pnw {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

int channel_from_json(const json& v) {
  if (v.is_number_integer()) {
    const int c = v.get<int>();
    if (c < 0 || c > 2)
      fail(ErrorCode::ParseError, "channel must be 0..2 or R/G/B");
    return c;
  }
  const std::string s = v.get<std::string>();
  if (s == "R" || s == "r") return 0;
  if (s == "G" || s == "g") return 1;
  if (s == "B" || s == "b") return 2;
  fail(ErrorCode::ParseError, "channel must be 0..2 or R/G/B, got '" + s + "'");
}

const char* channel_name(int c) { return c == 0 ? "R" : c == 1 ? "G" : "B"; }

FeatureSpec feature_from_json(const json& f) {
  FeatureSpec spec;
  const std::string kind = f.at("kind").get<std::string>();
  if (kind == "identity") {
    spec.kind = FeatureKind::IdentityVector;
  } else if (kind == "downsample_trim") {
    spec.kind = FeatureKind::DownsampleTrim;
  } else if (kind == "channel") {
    spec.kind = FeatureKind::ChannelSelect;
    spec.channel = channel_from_json(f.at("channel"));
  } else if (kind == "channel_stack") {
    spec.kind = FeatureKind::ChannelStack;
  } else if (kind == "gray_binary") {
    spec.kind = FeatureKind::GrayBinary;
    spec.threshold = f.value("threshold", 0.5);
    if (spec.threshold < 0.0 || spec.threshold > 1.0)
      fail(ErrorCode::ParseError, "gray_binary threshold must lie in [0,1]");
  } else if (kind == "volume") {
    spec.kind = FeatureKind::Volume3D;
  } else {
    fail(ErrorCode::ParseError, "unknown feature kind '" + kind + "'");
  }
  spec.reduce = f.value("reduce", false);
  spec.output_dims = f.value("dims", Index{0});
  return spec;
}

ordered_json feature_to_json(const FeatureSpec& spec) {
  ordered_json f;
  f["kind"] = feature_kind_name(spec.kind);
  if (spec.kind == FeatureKind::ChannelSelect)
    f["channel"] = channel_name(spec.channel);
  if (spec.kind == FeatureKind::GrayBinary) f["threshold"] = spec.threshold;
  if (spec.reduce) f["reduce"] = true;
  if (spec.output_dims != 0) f["dims"] = spec.output_dims;
  return f;
}

}  // namespace

RunConfig parse_run_config_json(const json& j) {
  RunConfig cfg;
  try {
    const json& ds = j.at("dataset");
    cfg.dataset.images = ds.value("images", std::string{});
    cfg.dataset.labels = ds.value("labels", std::string{});
    cfg.dataset.format = ds.value("format", std::string{"idx"});
    cfg.dataset.labels_one_based = ds.value("labels_one_based", false);

    cfg.n_labels = j.at("labels").get<int>();

    const json& arch = j.at("architecture");
    cfg.classes = arch.at("classes").get<std::vector<std::vector<int>>>();
    cfg.n_groups = arch.value("groups", 1);
    cfg.hidden = arch.at("hidden").get<int>();
    for (const json& f : arch.at("features")) {
      if (f.contains("cyclic_channels")) {
        const int n = f.at("cyclic_channels").get<int>();
        auto specs = cyclic_channel_specs(n, f.value("reduce", false));
        const Index dims = f.value("dims", Index{0});
        for (auto& s : specs) s.output_dims = dims;
        cfg.features.insert(cfg.features.end(), specs.begin(), specs.end());
      } else {
        cfg.features.push_back(feature_from_json(f));
      }
    }

    if (j.contains("trainer")) {
      const json& tr = j.at("trainer");
      if (tr.contains("sgd")) {
        const json& s = tr.at("sgd");
        cfg.sgd.batch_size = s.value("batch", cfg.sgd.batch_size);
        cfg.sgd.rate = s.value("rate", cfg.sgd.rate);
        cfg.sgd.momentum = s.value("momentum", cfg.sgd.momentum);
        cfg.sgd.max_epochs = s.value("epochs", cfg.sgd.max_epochs);
      }
      if (tr.contains("gdt")) {
        const json& g = tr.at("gdt");
        cfg.gdt.max_rounds = g.value("rounds", cfg.gdt.max_rounds);
        cfg.gdt.rate = g.value("rate", cfg.gdt.rate);
        cfg.gdt.batch_size = g.value("batch", cfg.gdt.batch_size);
        cfg.gdt.guard_loss = g.value("guard_loss", cfg.gdt.guard_loss);
        cfg.gdt.tighten = g.value("tighten", cfg.gdt.tighten);
        cfg.gdt.patience = g.value("patience", cfg.gdt.patience);
        cfg.gdt.boost = g.value("boost", cfg.gdt.boost);
      }
    }

    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.output_dir = j.value("output_dir", std::string{"out"});
    if (j.contains("exclude_ids"))
      cfg.exclude_ids = j.at("exclude_ids").get<std::vector<std::int64_t>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path + ": " + e.what());
  }
  return parse_run_config_json(j);
}

ordered_json run_config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["dataset"] = {{"images", cfg.dataset.images},
                  {"labels", cfg.dataset.labels},
                  {"format", cfg.dataset.format},
                  {"labels_one_based", cfg.dataset.labels_one_based}};
  j["labels"] = cfg.n_labels;
  ordered_json arch;
  arch["classes"] = cfg.classes;
  arch["groups"] = cfg.n_groups;
  arch["hidden"] = cfg.hidden;
  ordered_json feats = ordered_json::array();
  for (const auto& spec : cfg.features) feats.push_back(feature_to_json(spec));
  arch["features"] = feats;
  j["architecture"] = arch;
  j["trainer"] = {{"sgd",
                   {{"batch", cfg.sgd.batch_size},
                    {"rate", cfg.sgd.rate},
                    {"momentum", cfg.sgd.momentum},
                    {"epochs", cfg.sgd.max_epochs}}},
                  {"gdt",
                   {{"rounds", cfg.gdt.max_rounds},
                    {"rate", cfg.gdt.rate},
                    {"batch", cfg.gdt.batch_size},
                    {"guard_loss", cfg.gdt.guard_loss},
                    {"tighten", cfg.gdt.tighten},
                    {"patience", cfg.gdt.patience},
                    {"boost", cfg.gdt.boost}}}};
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["exclude_ids"] = cfg.exclude_ids;
  return j;
}

PnwArchitecture RunConfig::architecture() const {
  PnwArchitecture arch;
  arch.n_labels = n_labels;
  arch.partition.classes = classes;
  arch.n_groups = n_groups;
  arch.hidden_nodes = hidden;
  arch.feature_specs = features;
  arch.seed = seed;
  return arch;
}

void resolve_feature_dims(PnwArchitecture& arch, const ImageShape& shape) {
  for (auto& spec : arch.feature_specs)
    spec.output_dims = feature_output_dim(spec, shape);
}

}  // namespace pnw
