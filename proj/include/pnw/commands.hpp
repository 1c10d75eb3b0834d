#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "pnw/common.hpp"

namespace pnw {

/// Options shared by the CLI subcommands. `jobs == 0` means "take
/// PNW_NUM_JOBS from the environment, else 1".
struct CliOptions {
  std::string config_path;
  std::string checkpoint_path;
  std::string exclude_ids_path;
  int jobs = 0;
  bool trace = false;
  std::optional<std::uint64_t> seed_override;
};

/// Exit codes: 0 success, 1 usage or config error, 2 audit findings,
/// 3 training failure.
int run_audit(const CliOptions& opts);
int run_train(const CliOptions& opts);
int run_eval(const CliOptions& opts);
int run_inspect(const CliOptions& opts);

int exit_code_for(const Error& error);

}  // namespace pnw
