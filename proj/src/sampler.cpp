#include "samelda/sampler.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>

#include "samelda/errors.hpp"
#include "samelda/parallel.hpp"
#include "samelda/rng.hpp"

namespace samelda {

namespace {

// Prefix of nonzeros over the batch docs; entry b is where doc_ids[b]'s slice
// of mu starts. Also used to balance worker chunks by row size.
std::vector<std::int64_t> batch_nnz_prefix(const Corpus& corpus, const MiniBatch& batch) {
  std::vector<std::int64_t> prefix(batch.doc_ids.size() + 1, 0);
  for (std::size_t b = 0; b < batch.doc_ids.size(); ++b) {
    prefix[b + 1] = prefix[b] + corpus.doc_nnz(batch.doc_ids[b]);
  }
  return prefix;
}

}  // namespace

AnnealSchedule parse_schedule(std::string_view name) {
  if (name == "constant") return AnnealSchedule::constant;
  if (name == "linear") return AnnealSchedule::linear;
  if (name == "log") return AnnealSchedule::logarithmic;
  if (name == "invlinear") return AnnealSchedule::invlinear;
  throw ConfigError("unknown schedule '" + std::string(name) +
                    "' (expected constant|linear|log|invlinear)");
}

std::string schedule_name(AnnealSchedule schedule) {
  switch (schedule) {
    case AnnealSchedule::constant: return "constant";
    case AnnealSchedule::linear: return "linear";
    case AnnealSchedule::logarithmic: return "log";
    case AnnealSchedule::invlinear: return "invlinear";
  }
  return "constant";
}

void validate(const SamplerConfig& config) {
  if (config.n_topics < 1 || config.n_topics >= (1 << 20)) {
    throw ConfigError("n_topics must be in [1, 2^20)");
  }
  if (!(config.m > 0.0) || !std::isfinite(config.m)) {
    throw ConfigError("m must be positive and finite");
  }
  if (!(config.tau0 >= 1.0)) {
    throw ConfigError("tau0 must be >= 1");
  }
  if (!(config.gamma >= 0.5 && config.gamma <= 1.0)) {
    throw ConfigError("gamma must be in [0.5, 1]");
  }
  if (!(config.batch_fraction > 0.0 && config.batch_fraction <= 1.0)) {
    throw ConfigError("batch_fraction must be in (0, 1]");
  }
  if (config.t_max < 0) {
    throw ConfigError("t_max must be >= 0");
  }
  if (config.inner_sweeps < 1 || config.inner_sweeps > 255) {
    throw ConfigError("inner_sweeps must be in [1, 255]");
  }
  if (!(config.alpha > 0.0) || !(config.beta > 0.0)) {
    throw ConfigError("alpha and beta must be positive");
  }
  if (config.n_threads < 1) {
    throw ConfigError("n_threads must be >= 1");
  }
  if (!(config.init_noise >= 0.0) || !std::isfinite(config.init_noise)) {
    throw ConfigError("init_noise must be finite and >= 0");
  }
}

std::int64_t SampledCounts::theta_total() const {
  return std::accumulate(theta_counts.begin(), theta_counts.end(), std::int64_t{0});
}

std::int64_t SampledCounts::phi_total() const {
  return std::accumulate(phi_counts.begin(), phi_counts.end(), std::int64_t{0});
}

std::vector<double> sddmm(const DenseMatrix& theta_batch, const DenseMatrix& phi,
                          const Corpus& corpus, const MiniBatch& batch, int n_threads) {
  if (theta_batch.cols != phi.rows) {
    throw ConfigError("sddmm: theta columns must match phi rows");
  }
  if (theta_batch.rows != static_cast<std::int64_t>(batch.doc_ids.size())) {
    throw ConfigError("sddmm: theta rows must match the batch size");
  }
  if (phi.cols != corpus.n_words) {
    throw ConfigError("sddmm: phi columns must match the vocabulary size");
  }
  const std::int64_t n_topics = phi.rows;
  const DenseMatrix phi_t = transposed(phi);
  const auto prefix = batch_nnz_prefix(corpus, batch);
  std::vector<double> mu(static_cast<std::size_t>(prefix.back()));

  parallel_ranges(
      static_cast<std::int64_t>(batch.doc_ids.size()), n_threads, prefix,
      [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t b = begin; b < end; ++b) {
          const auto words = corpus.doc_words(batch.doc_ids[static_cast<std::size_t>(b)]);
          const auto theta_row = theta_batch.row(b);
          std::int64_t out = prefix[static_cast<std::size_t>(b)];
          for (const auto w : words) {
            const auto col = phi_t.row(w);
            double dot = 0.0;
            for (std::int64_t k = 0; k < n_topics; ++k) {
              dot += theta_row[static_cast<std::size_t>(k)] *
                     col[static_cast<std::size_t>(k)];
            }
            mu[static_cast<std::size_t>(out++)] = dot;
          }
        }
      });
  return mu;
}

SampledCounts sample_counts(const DenseMatrix& theta_batch, const DenseMatrix& phi,
                            std::span<const double> mu, const Corpus& corpus,
                            const MiniBatch& batch, double m_t,
                            std::uint64_t master_seed, std::int64_t t, int sweep,
                            int n_threads) {
  if (!(m_t > 0.0) || !std::isfinite(m_t)) {
    throw ConfigError("sample_counts: m_t must be positive and finite");
  }
  const std::int64_t n_topics = phi.rows;
  const std::int64_t n_words = phi.cols;
  const auto n_batch = static_cast<std::int64_t>(batch.doc_ids.size());
  const auto prefix = batch_nnz_prefix(corpus, batch);
  if (static_cast<std::int64_t>(mu.size()) != prefix.back()) {
    throw ConfigError("sample_counts: mu is not aligned with the batch nonzeros");
  }
  const DenseMatrix phi_t = transposed(phi);

  SampledCounts counts;
  counts.doc_ids = batch.doc_ids;
  counts.n_topics = n_topics;
  counts.n_words = n_words;
  counts.m_t = m_t;
  counts.theta_counts.assign(static_cast<std::size_t>(n_batch * n_topics), 0);
  counts.phi_counts.assign(static_cast<std::size_t>(n_words * n_topics), 0);

  const double uniform_weight = 1.0 / static_cast<double>(n_topics);
  parallel_ranges(n_batch, n_threads, prefix, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t b = begin; b < end; ++b) {
      const auto d = batch.doc_ids[static_cast<std::size_t>(b)];
      const auto words = corpus.doc_words(d);
      const auto cnts = corpus.doc_counts(d);
      const auto theta_row = theta_batch.row(b);
      auto* theta_out = counts.theta_counts.data() + b * n_topics;
      for (std::size_t i = 0; i < words.size(); ++i) {
        const auto w = words[i];
        const double cell_scale =
            m_t * static_cast<double>(cnts[i]);
        const double mu_dw = mu[static_cast<std::size_t>(
            prefix[static_cast<std::size_t>(b)] + static_cast<std::int64_t>(i))];
        const bool degenerate = mu_dw < 1e-30;  // 0/0 guard at cold start
        const auto col = phi_t.row(w);
        auto* phi_out = counts.phi_counts.data() + static_cast<std::int64_t>(w) * n_topics;
        for (std::int64_t k = 0; k < n_topics; ++k) {
          const double weight =
              degenerate ? uniform_weight
                         : theta_row[static_cast<std::size_t>(k)] *
                               col[static_cast<std::size_t>(k)] / mu_dw;
          const double rate = weight * cell_scale;
          if (!std::isfinite(rate)) {
            throw NumericalError("sample_counts: nonfinite Poisson rate");
          }
          auto stream = stream_for(
              master_seed,
              {static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(d),
               static_cast<std::uint32_t>(w),
               make_tag(StreamPurpose::poisson_counts, static_cast<std::uint32_t>(sweep),
                        static_cast<std::uint32_t>(k))});
          const std::int64_t z = poisson_sample(rate, stream);
          if (z != 0) {
            theta_out[k] += z;
            // Shared across workers; integer adds commute, so the result is
            // independent of interleaving.
            std::atomic_ref<std::int64_t>(phi_out[k]).fetch_add(
                z, std::memory_order_relaxed);
          }
        }
      }
    }
  });
  return counts;
}

void update_model(Model& model, const SampledCounts& counts, double rho_t) {
  if (!(rho_t > 0.0 && rho_t <= 1.0)) {
    throw ConfigError("update_model: rho_t must be in (0, 1]");
  }
  if (counts.n_topics != model.n_topics || counts.n_words != model.n_words) {
    throw ConfigError("update_model: counts are not shaped for this model");
  }
  for (std::size_t b = 0; b < counts.doc_ids.size(); ++b) {
    const auto d = counts.doc_ids[b];
    for (std::int64_t k = 0; k < model.n_topics; ++k) {
      model.theta(d, k) =
          counts.theta_hat(static_cast<std::int64_t>(b), k) + model.alpha;
    }
  }
  std::vector<double> candidate(static_cast<std::size_t>(model.n_words));
  for (std::int64_t k = 0; k < model.n_topics; ++k) {
    double total = 0.0;
    for (std::int64_t w = 0; w < model.n_words; ++w) {
      const double value = counts.phi_hat(k, w) + model.beta;
      candidate[static_cast<std::size_t>(w)] = value;
      total += value;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw NumericalError("update_model: phi row mass is not positive and finite");
    }
    auto phi_row = model.phi.row(k);
    for (std::int64_t w = 0; w < model.n_words; ++w) {
      phi_row[static_cast<std::size_t>(w)] =
          (1.0 - rho_t) * phi_row[static_cast<std::size_t>(w)] +
          rho_t * candidate[static_cast<std::size_t>(w)] / total;
    }
  }
}

double rho_schedule(std::int64_t t, double tau0, double gamma) {
  if (t < 0) {
    throw ConfigError("rho_schedule: t must be >= 0");
  }
  if (!(tau0 >= 1.0)) {
    throw ConfigError("rho_schedule: tau0 must be >= 1");
  }
  if (!(gamma >= 0.5 && gamma <= 1.0)) {
    throw ConfigError("rho_schedule: gamma must be in [0.5, 1]");
  }
  return std::pow(tau0 + static_cast<double>(t), -gamma);
}

double anneal_m(AnnealSchedule schedule, std::int64_t t, std::int64_t t_max, double m) {
  if (t < 1 || t > t_max) {
    throw ConfigError("anneal_m: t must be in [1, t_max]");
  }
  const auto td = static_cast<double>(t);
  const auto nd = static_cast<double>(t_max);
  switch (schedule) {
    case AnnealSchedule::constant:
      return m;
    case AnnealSchedule::linear:
      return 2.0 * m * td / (nd + 1.0);
    case AnnealSchedule::invlinear:
      return 2.0 * m * (nd + 1.0 - td) / (nd + 1.0);
    case AnnealSchedule::logarithmic: {
      if (t_max == 1) {
        return m;  // sum of logs is zero; mass conservation forces m_1 = m
      }
      // sum_{s=1..t_max} log s == lgamma(t_max + 1)
      const double value = m * nd * std::log(td) / std::lgamma(nd + 1.0);
      return std::max(value, 0.01);  // log 1 = 0 would yield a zero-sample period
    }
  }
  throw ConfigError("anneal_m: unknown schedule");
}

std::pair<Model, MetricsTrace> train(const Corpus& corpus, const SamplerConfig& config,
                                     const Corpus* heldout, std::int64_t eval_every) {
  validate(config);
  if (corpus.n_docs < 1) {
    throw ConfigError("train: corpus is empty");
  }
  Model model = init_model(config.n_topics, corpus.n_words, corpus.n_docs, config.alpha,
                           config.beta);
  MetricsTrace trace;
  if (config.t_max == 0) {
    return {std::move(model), std::move(trace)};
  }

  // Perturbing the uniform start belongs to the optimization loop, not to the
  // zero-iteration model above: a perfectly symmetric phi is a saddle point
  // that only sampling noise can break, and that noise vanishes as m grows.
  if (config.init_noise > 0.0) {
    auto stream = stream_for(config.seed, {0, 0, 0, make_tag(StreamPurpose::phi_init)});
    for (std::int64_t k = 0; k < config.n_topics; ++k) {
      auto row = model.phi.row(k);
      double total = 0.0;
      for (auto& v : row) {
        v = 1.0 + config.init_noise * stream.uniform();
        total += v;
      }
      for (auto& v : row) {
        v /= total;
      }
    }
  }

  MinibatchStream batches(corpus, config.batch_fraction, config.seed);
  const auto t_start = std::chrono::steady_clock::now();
  double tokens_seen = 0.0;
  double samples_per_word = 0.0;
  const auto corpus_tokens = static_cast<double>(corpus.n_tokens);

  DenseMatrix theta_batch;
  for (std::int64_t t = 0; t < config.t_max; ++t) {
    const MiniBatch batch = batches.next();
    const auto n_batch = static_cast<std::int64_t>(batch.doc_ids.size());
    const double m_t = anneal_m(config.schedule, t + 1, config.t_max, config.m);
    const double rho_t = rho_schedule(t, config.tau0, config.gamma);

    theta_batch = DenseMatrix(n_batch, config.n_topics);
    for (std::int64_t b = 0; b < n_batch; ++b) {
      const auto row = model.theta.row(batch.doc_ids[static_cast<std::size_t>(b)]);
      std::copy(row.begin(), row.end(), theta_batch.row(b).begin());
    }

    SampledCounts counts;
    for (std::int64_t sweep = 0; sweep < config.inner_sweeps; ++sweep) {
      const auto mu = sddmm(theta_batch, model.phi, corpus, batch, config.n_threads);
      counts = sample_counts(theta_batch, model.phi, mu, corpus, batch, m_t,
                             config.seed, t, static_cast<int>(sweep), config.n_threads);
      if (sweep + 1 < config.inner_sweeps) {
        for (std::int64_t b = 0; b < n_batch; ++b) {
          for (std::int64_t k = 0; k < config.n_topics; ++k) {
            theta_batch(b, k) = counts.theta_hat(b, k) + config.alpha;
          }
        }
      }
    }
    update_model(model, counts, rho_t);

    double batch_tokens = 0.0;
    for (const auto d : batch.doc_ids) {
      batch_tokens += static_cast<double>(corpus.doc_tokens(d));
    }
    tokens_seen += batch_tokens;
    samples_per_word += m_t * batch_tokens / corpus_tokens;

    if (heldout != nullptr && eval_every > 0 &&
        ((t + 1) % eval_every == 0 || t + 1 == config.t_max)) {
      const double ll =
          perword_loglik(model.phi, *heldout, config.alpha, config.seed,
                         config.n_threads);
      const std::chrono::duration<double> elapsed =
          std::chrono::steady_clock::now() - t_start;
      trace.push_back({t, tokens_seen / corpus_tokens, samples_per_word, ll,
                       elapsed.count(), m_t});
    }
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace samelda
