#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "samelda/corpus.hpp"
#include "samelda/model.hpp"

namespace samelda {

// One evaluation record. `passes` counts passes over the training data,
// `samples_per_word` the cumulative average number of topic samples taken per
// training token, `ll` the held-out per-word log-likelihood in nats.
struct TraceRow {
  std::int64_t t = 0;
  double passes = 0.0;
  double samples_per_word = 0.0;
  double ll = 0.0;
  double wall_seconds = 0.0;
  double m_t = 0.0;
};

using MetricsTrace = std::vector<TraceRow>;

// Document topic weights estimated on the observed half of a test document
// by iterating the deterministic responsibility update
//   theta[k] <- alpha + sum_w c_w * theta[k] phi[k,w] / mu_w,  then normalize,
// until convergence or `sweeps` iterations. No sampling: evaluation adds zero
// variance. An empty document yields the uniform vector.
std::vector<double> fold_in_theta(const DenseMatrix& phi,
                                  std::span<const std::int32_t> words,
                                  std::span<const std::int32_t> counts, double alpha,
                                  int sweeps = 50);

// Held-out per-word log-likelihood (nats/word, negative). Every test document
// is split 50/50 by tokens with a seeded shuffle; theta is folded in on the
// first half and the second half is scored as
//   ll = sum_d sum_(w,c) c * log(sum_k theta[k] phi[k,w]) / N_scored.
// Pure: the model is untouched and repeated calls agree bit for bit.
double perword_loglik(const DenseMatrix& phi, const Corpus& test_corpus, double alpha,
                      std::uint64_t seed, int n_threads = 1);

// CSV with header "t,passes,samples_per_word,ll,wall_seconds,m_t", one row per
// record, 17 significant digits so values survive a round trip exactly.
void write_metrics_csv(const MetricsTrace& trace, const std::string& path);
MetricsTrace read_metrics_csv(const std::string& path);

}  // namespace samelda
