#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "pnw/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"parallel neural web: error-free ensemble training"};
  app.require_subcommand(1);

  pnw::CliOptions opts;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config, bool needs_ckpt) {
    auto* config =
        cmd->add_option("--config", opts.config_path, "run configuration (JSON)");
    if (needs_config) config->required();
    if (needs_ckpt)
      cmd->add_option("--checkpoint", opts.checkpoint_path, "checkpoint file")
          ->required();
    cmd->add_option("--exclude-ids", opts.exclude_ids_path,
                    "file with dataset ids to drop, one per line");
    cmd->add_option("--jobs", opts.jobs,
                    "parallel training workers (default: PNW_NUM_JOBS or 1)");
    cmd->add_option("--seed", seed_value, "override the config seed")
        ->each([&](const std::string&) { opts.seed_override = seed_value; });
  };

  auto* audit =
      app.add_subcommand("audit", "scan a dataset for double-labeled images");
  add_common(audit, true, false);

  auto* train = app.add_subcommand("train", "train a model to zero training error");
  add_common(train, true, false);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval, false, true);
  eval->add_flag("--trace", opts.trace, "dump the full verdict chain per datum");

  auto* inspect = app.add_subcommand("inspect", "dump checkpoint metadata");
  inspect->add_option("--checkpoint", opts.checkpoint_path, "checkpoint file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand(audit)) return pnw::run_audit(opts);
    if (app.got_subcommand(train)) return pnw::run_train(opts);
    if (app.got_subcommand(eval)) return pnw::run_eval(opts);
    if (app.got_subcommand(inspect)) return pnw::run_inspect(opts);
  } catch (const pnw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pnw::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
