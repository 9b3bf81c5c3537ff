#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "samelda/corpus.hpp"
#include "samelda/eval.hpp"
#include "samelda/model.hpp"

namespace samelda {

enum class AnnealSchedule { constant, linear, logarithmic, invlinear };

// Accepts "constant", "linear", "log", "invlinear"; anything else is a
// ConfigError naming the offending value.
AnnealSchedule parse_schedule(std::string_view name);
std::string schedule_name(AnnealSchedule schedule);

struct SamplerConfig {
  std::int64_t n_topics = 16;  // K
  double m = 100.0;            // mean replica count (inverse temperature)
  AnnealSchedule schedule = AnnealSchedule::constant;
  double tau0 = 1.0;
  double gamma = 0.5;
  double batch_fraction = 0.05;
  std::int64_t t_max = 0;  // minibatch periods to run
  std::int64_t inner_sweeps = 2;
  std::uint64_t seed = 0;
  double alpha = 0.1;
  double beta = 0.01;
  int n_threads = 1;
  // Relative amplitude of the seeded random perturbation applied to the
  // uniform phi init. Zero keeps the rows exactly uniform, which is a
  // symmetric saddle point that only sampling noise can break (and that
  // noise shrinks as m grows); a small perturbation stands in for the
  // random initialization the annealed sampler assumes.
  double init_noise = 0.1;
};

void validate(const SamplerConfig& config);

// Topic counts sampled for one minibatch. The z draws are accumulated as raw
// integers and divided by m_t only on readout: integer addition is exact and
// associative, so the result is bit-identical for any worker count or
// scheduling. phi counts are stored word-major (W x K).
struct SampledCounts {
  std::vector<std::int32_t> doc_ids;  // batch docs, aligned with theta rows
  std::int64_t n_topics = 0;
  std::int64_t n_words = 0;
  double m_t = 1.0;
  std::vector<std::int64_t> theta_counts;  // B x K
  std::vector<std::int64_t> phi_counts;    // W x K

  double theta_hat(std::int64_t b, std::int64_t k) const {
    return static_cast<double>(theta_counts[static_cast<std::size_t>(b * n_topics + k)]) /
           m_t;
  }
  double phi_hat(std::int64_t k, std::int64_t w) const {
    return static_cast<double>(phi_counts[static_cast<std::size_t>(w * n_topics + k)]) /
           m_t;
  }
  std::int64_t theta_total() const;
  std::int64_t phi_total() const;
};

// Sampled dense-dense product: mu[i] = sum_k theta[b,k] phi[k,w] evaluated
// only at the batch's nonzeros, aligned with the concatenated rows of
// batch.doc_ids (theta row b corresponds to doc_ids[b]). Positions outside
// the sparsity pattern are never computed.
std::vector<double> sddmm(const DenseMatrix& theta_batch, const DenseMatrix& phi,
                          const Corpus& corpus, const MiniBatch& batch,
                          int n_threads = 1);

// For every batch nonzero (d,w) with token count c and every topic k, draws
//   z ~ Poisson(theta[b,k] phi[k,w] / mu[d,w] * m_t * c)
// from the stream keyed by (t, d, w, sweep, k) and accumulates z into the
// theta and phi counts. When mu underflows (< 1e-30) the topic weights fall
// back to uniform 1/K for that pair.
SampledCounts sample_counts(const DenseMatrix& theta_batch, const DenseMatrix& phi,
                            std::span<const double> mu, const Corpus& corpus,
                            const MiniBatch& batch, double m_t,
                            std::uint64_t master_seed, std::int64_t t, int sweep = 0,
                            int n_threads = 1);

// Persists theta rows for the batch docs (theta_hat + alpha), then blends phi
// toward the row-normalized candidate (phi_hat + beta):
//   phi <- (1 - rho_t) phi + rho_t normalize(phi_hat + beta).
// Blending two row-stochastic matrices keeps the rows stochastic.
void update_model(Model& model, const SampledCounts& counts, double rho_t);

// Step size (tau0 + t)^(-gamma) for the phi moving average; t counts from 0.
// Requires tau0 >= 1 and gamma in [0.5, 1].
double rho_schedule(std::int64_t t, double tau0, double gamma);

// Replica count for period t in 1..t_max. All schedules preserve total mass
// sum_t m_t = m * t_max, the logarithmic one up to its documented clamp
// (m_t >= 0.01 keeps the t=1 period from degenerating to zero samples).
double anneal_m(AnnealSchedule schedule, std::int64_t t, std::int64_t t_max, double m);

// Full minibatch training loop: per period, fetch a batch, run inner_sweeps
// rounds of sddmm + sample_counts (re-estimating the batch theta between
// rounds), fold the final counts into the model with rho_schedule(t), and
// every eval_every periods score the held-out corpus into the trace.
std::pair<Model, MetricsTrace> train(const Corpus& corpus, const SamplerConfig& config,
                                     const Corpus* heldout = nullptr,
                                     std::int64_t eval_every = 0);

}  // namespace samelda
