#pragma once

// Synthetic LDA corpus generator. The generating phi is the ground truth the
// recovery tests measure against, so this code deliberately shares nothing
// with the training path beyond the raw uniform stream.

#include <cstdint>

#include "samelda/corpus.hpp"
#include "samelda/model.hpp"
#include "samelda/rng.hpp"

namespace synthetic {

struct GeneratedCorpus {
  samelda::Corpus corpus;
  samelda::DenseMatrix phi_true;  // K x W, rows sum to 1
};

double gamma_variate(double shape, samelda::RandomStream& stream);

// Documents: theta_d ~ Dirichlet(theta_conc), length ~ 1 + Poisson(len_mean - 1),
// each token (k, w) drawn from theta_d and the k-th row of phi_true, where
// phi_true rows are Dirichlet(phi_conc) draws.
GeneratedCorpus make_corpus(std::int64_t n_docs, std::int64_t n_words,
                            std::int64_t n_topics, double len_mean, std::uint64_t seed,
                            double theta_conc = 0.2, double phi_conc = 0.08);

}  // namespace synthetic
