#include "samelda/cgs.hpp"

#include <chrono>

#include "samelda/errors.hpp"
#include "samelda/rng.hpp"

namespace samelda {

CgsState cgs_init(const Corpus& corpus, std::int64_t n_topics, double alpha, double beta,
                  std::uint64_t seed) {
  if (n_topics < 1) {
    throw ConfigError("cgs_init: n_topics must be >= 1");
  }
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw ConfigError("cgs_init: alpha and beta must be positive");
  }
  CgsState state;
  state.n_topics = n_topics;
  state.n_docs = corpus.n_docs;
  state.n_words = corpus.n_words;
  state.alpha = alpha;
  state.beta = beta;
  state.token_offsets.assign(1, 0);
  for (const auto c : corpus.counts) {
    state.token_offsets.push_back(state.token_offsets.back() + c);
  }
  state.z.assign(static_cast<std::size_t>(corpus.n_tokens), 0);
  state.doc_topic.assign(static_cast<std::size_t>(corpus.n_docs * n_topics), 0);
  state.word_topic.assign(static_cast<std::size_t>(corpus.n_words * n_topics), 0);
  state.topic_total.assign(static_cast<std::size_t>(n_topics), 0);

  for (std::int64_t d = 0; d < corpus.n_docs; ++d) {
    const auto words = corpus.doc_words(d);
    const auto row_begin = corpus.doc_offsets[static_cast<std::size_t>(d)];
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto w = words[i];
      const auto cell = row_begin + static_cast<std::int64_t>(i);
      auto stream = stream_for(
          seed, {0, static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(w),
                 make_tag(StreamPurpose::cgs_init)});
      for (auto tok = state.token_offsets[static_cast<std::size_t>(cell)];
           tok < state.token_offsets[static_cast<std::size_t>(cell) + 1]; ++tok) {
        const auto k = static_cast<std::int32_t>(
            stream.uniform_below(static_cast<std::uint64_t>(n_topics)));
        state.z[static_cast<std::size_t>(tok)] = k;
        ++state.doc_topic[static_cast<std::size_t>(d * n_topics + k)];
        ++state.word_topic[static_cast<std::size_t>(
            static_cast<std::int64_t>(w) * n_topics + k)];
        ++state.topic_total[static_cast<std::size_t>(k)];
      }
    }
  }
  return state;
}

void cgs_sweep(CgsState& state, const Corpus& corpus, std::uint64_t master_seed,
               std::int64_t sweep_index) {
  const std::int64_t n_topics = state.n_topics;
  const double w_beta = static_cast<double>(state.n_words) * state.beta;
  std::vector<double> weights(static_cast<std::size_t>(n_topics));

  for (std::int64_t d = 0; d < corpus.n_docs; ++d) {
    const auto words = corpus.doc_words(d);
    const auto row_begin = corpus.doc_offsets[static_cast<std::size_t>(d)];
    auto* doc_row = state.doc_topic.data() + d * n_topics;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto w = words[i];
      const auto cell = row_begin + static_cast<std::int64_t>(i);
      auto* word_row = state.word_topic.data() + static_cast<std::int64_t>(w) * n_topics;
      auto stream = stream_for(
          master_seed,
          {static_cast<std::uint32_t>(sweep_index), static_cast<std::uint32_t>(d),
           static_cast<std::uint32_t>(w), make_tag(StreamPurpose::cgs_sweep)});
      for (auto tok = state.token_offsets[static_cast<std::size_t>(cell)];
           tok < state.token_offsets[static_cast<std::size_t>(cell) + 1]; ++tok) {
        const auto old_k = state.z[static_cast<std::size_t>(tok)];
        --doc_row[old_k];
        --word_row[old_k];
        --state.topic_total[static_cast<std::size_t>(old_k)];

        for (std::int64_t k = 0; k < n_topics; ++k) {
          weights[static_cast<std::size_t>(k)] =
              (static_cast<double>(doc_row[k]) + state.alpha) *
              (static_cast<double>(word_row[k]) + state.beta) /
              (static_cast<double>(state.topic_total[static_cast<std::size_t>(k)]) +
               w_beta);
        }
        const auto new_k = static_cast<std::int32_t>(categorical_sample(weights, stream));

        state.z[static_cast<std::size_t>(tok)] = new_k;
        ++doc_row[new_k];
        ++word_row[new_k];
        ++state.topic_total[static_cast<std::size_t>(new_k)];
      }
    }
  }
}

Model cgs_model(const CgsState& state) {
  Model model;
  model.n_topics = state.n_topics;
  model.n_words = state.n_words;
  model.alpha = state.alpha;
  model.beta = state.beta;
  model.phi = DenseMatrix(state.n_topics, state.n_words);
  model.theta = DenseMatrix(state.n_docs, state.n_topics);
  const double w_beta = static_cast<double>(state.n_words) * state.beta;
  for (std::int64_t k = 0; k < state.n_topics; ++k) {
    const double denom =
        static_cast<double>(state.topic_total[static_cast<std::size_t>(k)]) + w_beta;
    for (std::int64_t w = 0; w < state.n_words; ++w) {
      model.phi(k, w) =
          (static_cast<double>(
               state.word_topic[static_cast<std::size_t>(w * state.n_topics + k)]) +
           state.beta) /
          denom;
    }
  }
  for (std::int64_t d = 0; d < state.n_docs; ++d) {
    for (std::int64_t k = 0; k < state.n_topics; ++k) {
      model.theta(d, k) =
          static_cast<double>(
              state.doc_topic[static_cast<std::size_t>(d * state.n_topics + k)]) +
          state.alpha;
    }
  }
  return model;
}

std::pair<Model, MetricsTrace> cgs_train(const Corpus& corpus, std::int64_t n_topics,
                                         double alpha, double beta,
                                         std::int64_t n_sweeps, std::uint64_t seed,
                                         std::int64_t eval_every, const Corpus* heldout,
                                         int n_threads_eval) {
  if (n_sweeps < 0) {
    throw ConfigError("cgs_train: n_sweeps must be >= 0");
  }
  CgsState state = cgs_init(corpus, n_topics, alpha, beta, seed);
  MetricsTrace trace;
  const auto t_start = std::chrono::steady_clock::now();
  for (std::int64_t sweep = 1; sweep <= n_sweeps; ++sweep) {
    cgs_sweep(state, corpus, seed, sweep);
    if (heldout != nullptr && eval_every > 0 &&
        (sweep % eval_every == 0 || sweep == n_sweeps)) {
      const Model snapshot = cgs_model(state);
      const double ll =
          perword_loglik(snapshot.phi, *heldout, alpha, seed, n_threads_eval);
      const std::chrono::duration<double> elapsed =
          std::chrono::steady_clock::now() - t_start;
      // One sample per token per sweep, so samples/word == sweep.
      trace.push_back({sweep, static_cast<double>(sweep), static_cast<double>(sweep),
                       ll, elapsed.count(), 1.0});
    }
  }
  return {cgs_model(state), std::move(trace)};
}

}  // namespace samelda
