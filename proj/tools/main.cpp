#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "samelda/commands.hpp"
#include "samelda/errors.hpp"
#include "samelda/sampler.hpp"

namespace {

void add_common_options(CLI::App* cmd, samelda::RunConfig& config,
                        std::string& schedule, std::string& config_path) {
  cmd->add_option("--config", config_path, "key=value config file; flags override it");
  cmd->add_option("--docword", config.docword_path, "UCI bag-of-words docword file");
  cmd->add_option("--vocab", config.vocab_path, "vocabulary file, one token per line");
  cmd->add_option("--out", config.out_dir, "output directory");
  cmd->add_option("--method", config.method, "trainer: same or cgs")
      ->check(CLI::IsMember({"same", "cgs"}));
  cmd->add_option("--k", config.sampler.n_topics, "topic count K");
  cmd->add_option("--m", config.sampler.m, "mean replica count m");
  cmd->add_option("--schedule", schedule, "annealing schedule for m")
      ->check(CLI::IsMember({"constant", "linear", "log", "invlinear"}));
  cmd->add_option("--tau0", config.sampler.tau0, "blending offset tau0");
  cmd->add_option("--gamma", config.sampler.gamma, "blending decay gamma");
  cmd->add_option("--batch-fraction", config.sampler.batch_fraction,
                  "minibatch size as a fraction of the training documents");
  cmd->add_option("--t-max", config.sampler.t_max, "minibatch periods (overrides --passes)");
  cmd->add_option("--passes", config.passes, "passes over the training data");
  cmd->add_option("--sweeps", config.sweeps, "CGS sweep count (overrides --passes)");
  cmd->add_option("--inner-sweeps", config.sampler.inner_sweeps,
                  "theta re-estimation rounds per period");
  cmd->add_option("--init-noise", config.sampler.init_noise,
                  "relative amplitude of the seeded perturbation of the uniform "
                  "phi start (0 keeps it exactly uniform)");
  cmd->add_option("--seed", config.sampler.seed, "master seed");
  cmd->add_option("--alpha", config.sampler.alpha, "document-topic smoothing");
  cmd->add_option("--beta", config.sampler.beta, "topic-word smoothing");
  cmd->add_option("--threads", config.sampler.n_threads, "sampler worker threads");
  cmd->add_option("--test-fraction", config.test_fraction,
                  "held-out fraction of documents");
  cmd->add_option("--eval-every", config.eval_every,
                  "periods between held-out evaluations (0: only at the end)");
}

// Fills RunConfig fields from a flat key=value file wherever the matching
// flag was not given on the command line. Keys are flag names without the
// leading dashes; '-' and '_' are interchangeable.
void merge_config_file(const CLI::App* cmd, const std::string& path,
                       samelda::RunConfig& config, std::string& schedule,
                       std::string& m_list) {
  std::ifstream in(path);
  if (!in) {
    throw samelda::IoError("cannot open config file: " + path);
  }
  const auto flag_absent = [cmd](const std::string& flag) {
    const auto* option = cmd->get_option_no_throw(flag);
    return option == nullptr || option->count() == 0;
  };
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw samelda::ConfigError("config file line " + std::to_string(line_number) +
                                 " is not key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    for (auto& c : key) {
      if (c == '_') {
        c = '-';
      }
    }
    try {
      if (key == "docword" && flag_absent("--docword")) {
        config.docword_path = value;
      } else if (key == "vocab" && flag_absent("--vocab")) {
        config.vocab_path = value;
      } else if (key == "out" && flag_absent("--out")) {
        config.out_dir = value;
      } else if (key == "method" && flag_absent("--method")) {
        config.method = value;
      } else if (key == "schedule" && flag_absent("--schedule")) {
        schedule = value;
      } else if (key == "m-list" && flag_absent("--m-list")) {
        m_list = value;
      } else if (key == "k" && flag_absent("--k")) {
        config.sampler.n_topics = std::stoll(value);
      } else if (key == "m" && flag_absent("--m")) {
        config.sampler.m = std::stod(value);
      } else if (key == "tau0" && flag_absent("--tau0")) {
        config.sampler.tau0 = std::stod(value);
      } else if (key == "gamma" && flag_absent("--gamma")) {
        config.sampler.gamma = std::stod(value);
      } else if (key == "batch-fraction" && flag_absent("--batch-fraction")) {
        config.sampler.batch_fraction = std::stod(value);
      } else if (key == "t-max" && flag_absent("--t-max")) {
        config.sampler.t_max = std::stoll(value);
      } else if (key == "passes" && flag_absent("--passes")) {
        config.passes = std::stod(value);
      } else if (key == "sweeps" && flag_absent("--sweeps")) {
        config.sweeps = std::stoll(value);
      } else if (key == "inner-sweeps" && flag_absent("--inner-sweeps")) {
        config.sampler.inner_sweeps = std::stoll(value);
      } else if (key == "init-noise" && flag_absent("--init-noise")) {
        config.sampler.init_noise = std::stod(value);
      } else if (key == "seed" && flag_absent("--seed")) {
        config.sampler.seed = std::stoull(value);
      } else if (key == "alpha" && flag_absent("--alpha")) {
        config.sampler.alpha = std::stod(value);
      } else if (key == "beta" && flag_absent("--beta")) {
        config.sampler.beta = std::stod(value);
      } else if (key == "threads" && flag_absent("--threads")) {
        config.sampler.n_threads = static_cast<int>(std::stoll(value));
      } else if (key == "test-fraction" && flag_absent("--test-fraction")) {
        config.test_fraction = std::stod(value);
      } else if (key == "eval-every" && flag_absent("--eval-every")) {
        config.eval_every = std::stoll(value);
      } else if (cmd->get_option_no_throw("--" + key) == nullptr) {
        throw samelda::ConfigError("config file line " + std::to_string(line_number) +
                                   ": unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw samelda::ConfigError("config file line " + std::to_string(line_number) +
                                 ": bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw samelda::ConfigError("config file line " + std::to_string(line_number) +
                                 ": bad value for '" + key + "'");
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LDA trainer: annealed (SAME) Gibbs sampling with factored Poisson "
               "counts, plus a collapsed Gibbs baseline"};
  app.require_subcommand(1);

  samelda::RunConfig config;
  std::string schedule = "constant";
  std::string m_list;
  std::string config_path;

  auto* train_cmd = app.add_subcommand("train", "train a model, write checkpoint + metrics");
  add_common_options(train_cmd, config, schedule, config_path);

  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a test corpus");
  eval_cmd->add_option("--checkpoint", config.checkpoint_path, "model checkpoint")
      ->required();
  eval_cmd->add_option("--docword", config.docword_path, "test docword file")->required();
  eval_cmd->add_option("--vocab", config.vocab_path, "vocabulary file")->required();
  eval_cmd->add_option("--alpha", config.sampler.alpha, "fold-in smoothing");
  eval_cmd->add_option("--seed", config.sampler.seed, "token split seed");
  eval_cmd->add_option("--threads", config.sampler.n_threads, "evaluation threads");

  auto* sweep_m_cmd =
      app.add_subcommand("sweep-m", "train once per m value, emit a comparison CSV");
  add_common_options(sweep_m_cmd, config, schedule, config_path);
  sweep_m_cmd->add_option("--m-list", m_list, "comma-separated m values (default 1,5,20,100,500)");

  auto* sweep_schedule_cmd = app.add_subcommand(
      "sweep-schedule", "train once per annealing schedule, emit a comparison CSV");
  add_common_options(sweep_schedule_cmd, config, schedule, config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help / --version
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App* parsed_cmd = nullptr;
  if (train_cmd->parsed()) {
    config.subcommand = "train";
    parsed_cmd = train_cmd;
  } else if (eval_cmd->parsed()) {
    config.subcommand = "eval";
    parsed_cmd = eval_cmd;
  } else if (sweep_m_cmd->parsed()) {
    config.subcommand = "sweep-m";
    parsed_cmd = sweep_m_cmd;
  } else if (sweep_schedule_cmd->parsed()) {
    config.subcommand = "sweep-schedule";
    parsed_cmd = sweep_schedule_cmd;
  }

  try {
    if (!config_path.empty()) {
      merge_config_file(parsed_cmd, config_path, config, schedule, m_list);
    }
    config.sampler.schedule = samelda::parse_schedule(schedule);
    if (!m_list.empty()) {
      config.m_list.clear();
      std::size_t begin = 0;
      while (begin <= m_list.size()) {
        const auto comma = m_list.find(',', begin);
        const auto piece = m_list.substr(
            begin, comma == std::string::npos ? std::string::npos : comma - begin);
        if (!piece.empty()) {
          config.m_list.push_back(std::stod(piece));
        }
        if (comma == std::string::npos) {
          break;
        }
        begin = comma + 1;
      }
      if (config.m_list.empty()) {
        throw samelda::ConfigError("--m-list is empty");
      }
    }
  } catch (const samelda::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const samelda::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: invalid --m-list: " << e.what() << "\n";
    return 1;
  }

  return samelda::run_command(config);
}
