#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "samelda/sampler.hpp"

namespace samelda {

// Fully resolved run description: CLI flags merged over the optional config
// file. The manifest written next to the outputs records exactly this.
struct RunConfig {
  std::string subcommand;  // train | eval | sweep-m | sweep-schedule
  std::string method = "same";  // same | cgs
  std::string docword_path;
  std::string vocab_path;
  std::string out_dir = ".";
  std::string checkpoint_path;  // eval input

  SamplerConfig sampler;
  double test_fraction = 0.1;
  std::int64_t eval_every = 0;
  double passes = 0.0;        // derives t_max (SAME) or sweeps (CGS) when set
  std::int64_t sweeps = 0;    // CGS sweep count; overrides passes
  std::vector<double> m_list = {1.0, 5.0, 20.0, 100.0, 500.0};
};

// Static validation; throws ConfigError with a single-line reason.
void validate(const RunConfig& config);

// Subcommand bodies. They throw ConfigError / IoError / NumericalError;
// run_command maps those to exit codes 1 / 2 / 3 and prints the reason.
void cmd_train(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_sweep_m(const RunConfig& config);
void cmd_sweep_schedule(const RunConfig& config);

int run_command(const RunConfig& config);

}  // namespace samelda
