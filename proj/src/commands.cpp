#include "samelda/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "samelda/cgs.hpp"
#include "samelda/corpus.hpp"
#include "samelda/errors.hpp"
#include "samelda/eval.hpp"

namespace samelda {

namespace {

std::string git_describe() {
  std::string result = "unknown";
  if (FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r")) {
    char buffer[128];
    if (fgets(buffer, sizeof(buffer), pipe) != nullptr) {
      result = buffer;
      while (!result.empty() && (result.back() == '\n' || result.back() == '\r')) {
        result.pop_back();
      }
    }
    pclose(pipe);
    if (result.empty()) {
      result = "unknown";
    }
  }
  return result;
}

nlohmann::json config_json(const RunConfig& config) {
  return {
      {"subcommand", config.subcommand},
      {"method", config.method},
      {"docword", config.docword_path},
      {"vocab", config.vocab_path},
      {"out_dir", config.out_dir},
      {"checkpoint", config.checkpoint_path},
      {"k", config.sampler.n_topics},
      {"m", config.sampler.m},
      {"schedule", schedule_name(config.sampler.schedule)},
      {"tau0", config.sampler.tau0},
      {"gamma", config.sampler.gamma},
      {"batch_fraction", config.sampler.batch_fraction},
      {"t_max", config.sampler.t_max},
      {"inner_sweeps", config.sampler.inner_sweeps},
      {"init_noise", config.sampler.init_noise},
      {"seed", config.sampler.seed},
      {"alpha", config.sampler.alpha},
      {"beta", config.sampler.beta},
      {"threads", config.sampler.n_threads},
      {"test_fraction", config.test_fraction},
      {"eval_every", config.eval_every},
      {"passes", config.passes},
      {"sweeps", config.sweeps},
      {"m_list", config.m_list},
  };
}

void write_manifest(const RunConfig& config, const nlohmann::json& extra,
                    const std::string& path) {
  nlohmann::json manifest = {
      {"config", config_json(config)},
      {"git_describe", git_describe()},
  };
  manifest.update(extra);
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write manifest: " + path);
  }
  out << manifest.dump(2) << "\n";
}

struct LoadedData {
  Corpus train;
  Corpus test;
};

LoadedData load_and_split(const RunConfig& config) {
  const Corpus corpus = load_uci_bow(config.docword_path, config.vocab_path);
  auto [train_part, test_part] =
      split_holdout(corpus, config.test_fraction, config.sampler.seed);
  return {std::move(train_part), std::move(test_part)};
}

// Periods for the requested number of passes over the training documents.
std::int64_t periods_for_passes(const Corpus& train, const SamplerConfig& sampler,
                                double passes) {
  MinibatchStream probe(train, sampler.batch_fraction, sampler.seed);
  const auto per_pass = probe.batches_per_pass();
  return std::max<std::int64_t>(
      0, static_cast<std::int64_t>(std::llround(passes * static_cast<double>(per_pass))));
}

struct TrainOutput {
  Model model;
  MetricsTrace trace;
  double wall_seconds = 0.0;
  double effective_passes = 0.0;
  std::int64_t t_max = 0;
};

TrainOutput run_training(const RunConfig& config, const Corpus& train_part,
                         const Corpus& test_part) {
  TrainOutput out;
  const auto t_start = std::chrono::steady_clock::now();
  if (config.method == "cgs") {
    std::int64_t n_sweeps = config.sweeps;
    if (n_sweeps == 0 && config.passes > 0) {
      n_sweeps = static_cast<std::int64_t>(std::llround(config.passes));
    }
    // eval_every == 0 means "score once at the end".
    const auto cadence = config.eval_every > 0 ? config.eval_every : n_sweeps;
    auto [model, trace] =
        cgs_train(train_part, config.sampler.n_topics, config.sampler.alpha,
                  config.sampler.beta, n_sweeps, config.sampler.seed, cadence, &test_part,
                  config.sampler.n_threads);
    out.model = std::move(model);
    out.trace = std::move(trace);
    out.effective_passes = static_cast<double>(n_sweeps);
    out.t_max = n_sweeps;
  } else {
    SamplerConfig sampler = config.sampler;
    if (sampler.t_max == 0 && config.passes > 0) {
      sampler.t_max = periods_for_passes(train_part, sampler, config.passes);
    }
    const auto cadence = config.eval_every > 0 ? config.eval_every : sampler.t_max;
    auto [model, trace] = train(train_part, sampler, &test_part, cadence);
    out.model = std::move(model);
    out.trace = std::move(trace);
    MinibatchStream probe(train_part, sampler.batch_fraction, sampler.seed);
    out.effective_passes = static_cast<double>(sampler.t_max) /
                           static_cast<double>(probe.batches_per_pass());
    out.t_max = sampler.t_max;
  }
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - t_start;
  out.wall_seconds = elapsed.count();
  return out;
}

void check_model_finite(const Model& model) {
  for (const double v : model.phi.data) {
    if (!std::isfinite(v)) {
      throw NumericalError("NaN detected in phi");
    }
  }
}

}  // namespace

void validate(const RunConfig& config) {
  if (config.method != "same" && config.method != "cgs") {
    throw ConfigError("--method must be 'same' or 'cgs'");
  }
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
    throw ConfigError("--test-fraction must be in (0, 1)");
  }
  if (config.eval_every < 0) {
    throw ConfigError("--eval-every must be >= 0");
  }
  if (config.passes < 0.0) {
    throw ConfigError("--passes must be >= 0");
  }
  if (config.sweeps < 0) {
    throw ConfigError("--sweeps must be >= 0");
  }
  if (config.subcommand != "eval" && config.docword_path.empty()) {
    throw ConfigError("--docword is required");
  }
  if (config.subcommand == "sweep-m" && config.m_list.empty()) {
    throw ConfigError("--m-list must not be empty");
  }
  for (const double m : config.m_list) {
    if (!(m > 0.0)) {
      throw ConfigError("--m-list entries must be positive");
    }
  }
  validate(config.sampler);
}

void cmd_train(const RunConfig& config) {
  validate(config);
  std::filesystem::create_directories(config.out_dir);
  const auto data = load_and_split(config);
  const auto result = run_training(config, data.train, data.test);
  check_model_finite(result.model);

  const auto out = std::filesystem::path(config.out_dir);
  save_checkpoint(result.model, (out / "model.bin").string());
  write_metrics_csv(result.trace, (out / "metrics.csv").string());
  write_manifest(config,
                 {{"wall_seconds", result.wall_seconds},
                  {"t_max_effective", result.t_max},
                  {"passes_effective", result.effective_passes},
                  {"train_docs", data.train.n_docs},
                  {"test_docs", data.test.n_docs},
                  {"train_tokens", data.train.n_tokens},
                  {"vocab_size", data.train.n_words}},
                 (out / "manifest.json").string());
}

void cmd_eval(const RunConfig& config) {
  if (config.checkpoint_path.empty()) {
    throw ConfigError("--checkpoint is required");
  }
  if (config.docword_path.empty()) {
    throw ConfigError("--docword is required");
  }
  const Model model = load_checkpoint(config.checkpoint_path);
  const Corpus test = load_uci_bow(config.docword_path, config.vocab_path);
  const double ll = perword_loglik(model.phi, test, config.sampler.alpha,
                                   config.sampler.seed, config.sampler.n_threads);
  std::printf("ll=%.17g\n", ll);
}

void cmd_sweep_m(const RunConfig& config) {
  validate(config);
  std::filesystem::create_directories(config.out_dir);
  const auto data = load_and_split(config);

  const auto csv_path = std::filesystem::path(config.out_dir) / "sweep_m.csv";
  std::ofstream csv(csv_path);
  if (!csv) {
    throw IoError("cannot write " + csv_path.string());
  }
  csv << "m,runtime_per_pass,final_ll\n";
  char line[160];
  for (const double m : config.m_list) {
    RunConfig run = config;
    run.sampler.m = m;
    const auto result = run_training(run, data.train, data.test);
    check_model_finite(result.model);
    const double per_pass =
        result.effective_passes > 0 ? result.wall_seconds / result.effective_passes : 0.0;
    const double final_ll = result.trace.empty() ? 0.0 : result.trace.back().ll;
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", m, per_pass, final_ll);
    csv << line;
  }
  write_manifest(config, {{"output", "sweep_m.csv"}},
                 (std::filesystem::path(config.out_dir) / "manifest.json").string());
}

void cmd_sweep_schedule(const RunConfig& config) {
  validate(config);
  std::filesystem::create_directories(config.out_dir);
  const auto data = load_and_split(config);

  const auto csv_path = std::filesystem::path(config.out_dir) / "sweep_schedule.csv";
  std::ofstream csv(csv_path);
  if (!csv) {
    throw IoError("cannot write " + csv_path.string());
  }
  csv << "schedule,runtime_per_pass,final_ll\n";
  char line[192];
  for (const auto schedule :
       {AnnealSchedule::constant, AnnealSchedule::linear, AnnealSchedule::logarithmic,
        AnnealSchedule::invlinear}) {
    RunConfig run = config;
    run.sampler.schedule = schedule;
    const auto result = run_training(run, data.train, data.test);
    check_model_finite(result.model);
    const double per_pass =
        result.effective_passes > 0 ? result.wall_seconds / result.effective_passes : 0.0;
    const double final_ll = result.trace.empty() ? 0.0 : result.trace.back().ll;
    std::snprintf(line, sizeof(line), "%s,%.17g,%.17g\n",
                  schedule_name(schedule).c_str(), per_pass, final_ll);
    csv << line;
  }
  write_manifest(config, {{"output", "sweep_schedule.csv"}},
                 (std::filesystem::path(config.out_dir) / "manifest.json").string());
}

int run_command(const RunConfig& config) {
  try {
    if (config.subcommand == "train") {
      cmd_train(config);
    } else if (config.subcommand == "eval") {
      cmd_eval(config);
    } else if (config.subcommand == "sweep-m") {
      cmd_sweep_m(config);
    } else if (config.subcommand == "sweep-schedule") {
      cmd_sweep_schedule(config);
    } else {
      throw ConfigError("unknown subcommand '" + config.subcommand + "'");
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace samelda
