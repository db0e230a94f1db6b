#pragma once

// Subcommand implementations behind the coupled_do executable. Each returns
// a process exit code; `run` maps exceptions onto the same codes.

#include "cdo/io.hpp"
#include "cdo/verify.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cdo::cli {

enum ExitCode : int {
  kOk = 0,
  kVerifyFailed = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericalError = 4,
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> modes;  // comma-separated
  bool noisy = false;
};

/// Applies command-line overrides and re-validates.
io::ExperimentConfig apply_overrides(io::ExperimentConfig config, const Overrides& overrides);

/// COUPLED_DO_THREADS, 0 or unset = hardware concurrency.
unsigned thread_count();

struct LearnOutcome {
  FitResult fit;
  std::string source;
  std::size_t samples = 0;
};

/// Builds the training data the config describes and fits it.
LearnOutcome learn(const io::ExperimentConfig& config);

int cmd_learn(const io::ExperimentConfig& config, std::ostream& out);
int cmd_sweep(const io::ExperimentConfig& config, std::ostream& out);
int cmd_simulate(const io::ExperimentConfig& config, std::ostream& out);
int cmd_verify(verify::Level level, std::ostream& out);

/// Full command-line entry point.
int run(int argc, char** argv);

}  // namespace cdo::cli
