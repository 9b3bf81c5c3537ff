#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "samelda/corpus.hpp"
#include "samelda/eval.hpp"
#include "samelda/model.hpp"

namespace samelda {

// Token-level collapsed Gibbs sampler state. Tokens are the corpus nonzeros
// expanded by multiplicity, in CSR order; token_offsets maps each nonzero
// cell to its token range. Count arrays stay consistent with z after every
// sweep: sum_k doc_topic[d,k] == N_d, word/topic sums match, all nonnegative.
struct CgsState {
  std::int64_t n_topics = 0;
  std::int64_t n_docs = 0;
  std::int64_t n_words = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::int64_t> token_offsets;  // nnz + 1
  std::vector<std::int32_t> z;              // n_tokens topic assignments
  std::vector<std::int32_t> doc_topic;      // D x K
  std::vector<std::int32_t> word_topic;     // W x K
  std::vector<std::int64_t> topic_total;    // K
};

// Uniform-random assignment per token, counts rebuilt to match.
CgsState cgs_init(const Corpus& corpus, std::int64_t n_topics, double alpha, double beta,
                  std::uint64_t seed);

// One sequential pass over all tokens, resampling each assignment from
//   p(k) proportional to (doc_topic[d,k] + alpha) * (word_topic[w,k] + beta)
//                        / (topic_total[k] + W beta)
// with the current token removed from the counts.
void cgs_sweep(CgsState& state, const Corpus& corpus, std::uint64_t master_seed,
               std::int64_t sweep_index);

// Posterior-mean read-out: phi[k,w] = (word_topic + beta) / (topic_total + W beta),
// theta rows the smoothed document counts.
Model cgs_model(const CgsState& state);

// Runs n_sweeps passes; every eval_every sweeps (and at the end) reads out the
// model and scores the held-out corpus. The trace advances one sample per
// word per sweep.
std::pair<Model, MetricsTrace> cgs_train(const Corpus& corpus, std::int64_t n_topics,
                                         double alpha, double beta,
                                         std::int64_t n_sweeps, std::uint64_t seed,
                                         std::int64_t eval_every,
                                         const Corpus* heldout = nullptr,
                                         int n_threads_eval = 1);

}  // namespace samelda
