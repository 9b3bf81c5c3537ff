#include "samelda/eval.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "samelda/errors.hpp"
#include "samelda/parallel.hpp"
#include "samelda/rng.hpp"

namespace samelda {

namespace {

// Core iteration over a transposed phi (W x K); contiguous per-word columns
// keep the hot loop cache-friendly.
std::vector<double> fold_in_theta_t(const DenseMatrix& phi_t,
                                    std::span<const std::int32_t> words,
                                    std::span<const std::int32_t> counts, double alpha,
                                    int sweeps) {
  const std::int64_t n_topics = phi_t.cols;
  std::vector<double> theta(static_cast<std::size_t>(n_topics),
                            1.0 / static_cast<double>(n_topics));
  if (words.empty()) {
    return theta;
  }
  std::vector<double> next(static_cast<std::size_t>(n_topics));
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (std::int64_t k = 0; k < n_topics; ++k) {
      next[static_cast<std::size_t>(k)] = alpha;
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto col = phi_t.row(words[i]);
      double mu = 0.0;
      for (std::int64_t k = 0; k < n_topics; ++k) {
        mu += theta[static_cast<std::size_t>(k)] * col[static_cast<std::size_t>(k)];
      }
      if (!(mu > 0.0)) {
        continue;  // word unreachable under phi; it cannot inform theta
      }
      const double scale = static_cast<double>(counts[i]) / mu;
      for (std::int64_t k = 0; k < n_topics; ++k) {
        next[static_cast<std::size_t>(k)] +=
            scale * theta[static_cast<std::size_t>(k)] * col[static_cast<std::size_t>(k)];
      }
    }
    double total = 0.0;
    for (std::int64_t k = 0; k < n_topics; ++k) {
      total += next[static_cast<std::size_t>(k)];
    }
    double delta = 0.0;
    for (std::int64_t k = 0; k < n_topics; ++k) {
      const double value = next[static_cast<std::size_t>(k)] / total;
      delta = std::max(delta, std::abs(value - theta[static_cast<std::size_t>(k)]));
      theta[static_cast<std::size_t>(k)] = value;
    }
    if (delta < 1e-12) {
      break;
    }
  }
  return theta;
}

}  // namespace

std::vector<double> fold_in_theta(const DenseMatrix& phi,
                                  std::span<const std::int32_t> words,
                                  std::span<const std::int32_t> counts, double alpha,
                                  int sweeps) {
  return fold_in_theta_t(transposed(phi), words, counts, alpha, sweeps);
}

double perword_loglik(const DenseMatrix& phi, const Corpus& test_corpus, double alpha,
                      std::uint64_t seed, int n_threads) {
  if (test_corpus.n_docs < 1) {
    throw ConfigError("perword_loglik: test corpus is empty");
  }
  if (phi.cols != test_corpus.n_words) {
    throw ConfigError("perword_loglik: phi width disagrees with corpus vocabulary");
  }
  const DenseMatrix phi_t = transposed(phi);

  std::vector<double> doc_logp(static_cast<std::size_t>(test_corpus.n_docs), 0.0);
  std::vector<std::int64_t> doc_scored(static_cast<std::size_t>(test_corpus.n_docs), 0);

  parallel_ranges(test_corpus.n_docs, n_threads, [&](std::int64_t begin, std::int64_t end) {
    std::vector<std::int32_t> fold_counts, score_counts;
    for (std::int64_t d = begin; d < end; ++d) {
      const auto words = test_corpus.doc_words(d);
      const auto counts = test_corpus.doc_counts(d);
      const auto n_cells = static_cast<std::int64_t>(words.size());
      std::int64_t n_tokens = 0;
      for (const auto c : counts) {
        n_tokens += c;
      }

      // Expand tokens as row-local cell indices, shuffle, and give the first
      // ceil(N/2) to fold-in. The halves recombine into per-cell counts.
      std::vector<std::int32_t> slots(static_cast<std::size_t>(n_tokens));
      std::size_t pos = 0;
      for (std::int64_t i = 0; i < n_cells; ++i) {
        for (std::int32_t rep = 0; rep < counts[static_cast<std::size_t>(i)]; ++rep) {
          slots[pos++] = static_cast<std::int32_t>(i);
        }
      }
      auto stream = stream_for(
          seed, {0, static_cast<std::uint32_t>(d), 0, make_tag(StreamPurpose::eval_split)});
      for (std::int64_t i = n_tokens - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(
            stream.uniform_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(slots[static_cast<std::size_t>(i)], slots[static_cast<std::size_t>(j)]);
      }
      const std::int64_t n_fold = (n_tokens + 1) / 2;
      fold_counts.assign(static_cast<std::size_t>(n_cells), 0);
      score_counts.assign(static_cast<std::size_t>(n_cells), 0);
      for (std::int64_t i = 0; i < n_tokens; ++i) {
        auto& half = i < n_fold ? fold_counts : score_counts;
        ++half[static_cast<std::size_t>(slots[static_cast<std::size_t>(i)])];
      }

      const auto theta = fold_in_theta_t(phi_t, words, fold_counts, alpha, 50);

      double logp = 0.0;
      std::int64_t scored = 0;
      for (std::int64_t i = 0; i < n_cells; ++i) {
        const auto c = score_counts[static_cast<std::size_t>(i)];
        if (c == 0) {
          continue;
        }
        const auto col = phi_t.row(words[static_cast<std::size_t>(i)]);
        double p = 0.0;
        for (std::int64_t k = 0; k < phi_t.cols; ++k) {
          p += theta[static_cast<std::size_t>(k)] * col[static_cast<std::size_t>(k)];
        }
        if (!(p > 0.0)) {
          throw NumericalError("perword_loglik: zero word probability");
        }
        logp += static_cast<double>(c) * std::log(p);
        scored += c;
      }
      doc_logp[static_cast<std::size_t>(d)] = logp;
      doc_scored[static_cast<std::size_t>(d)] = scored;
    }
  });

  // Reduce in document order so the total is independent of threading.
  double total_logp = 0.0;
  std::int64_t total_scored = 0;
  for (std::int64_t d = 0; d < test_corpus.n_docs; ++d) {
    total_logp += doc_logp[static_cast<std::size_t>(d)];
    total_scored += doc_scored[static_cast<std::size_t>(d)];
  }
  if (total_scored == 0) {
    throw NumericalError("perword_loglik: no scorable tokens in the test corpus");
  }
  return total_logp / static_cast<double>(total_scored);
}

void write_metrics_csv(const MetricsTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write metrics csv: " + path);
  }
  out << "t,passes,samples_per_word,ll,wall_seconds,m_t\n";
  char line[256];
  for (const auto& row : trace) {
    std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(row.t), row.passes, row.samples_per_word,
                  row.ll, row.wall_seconds, row.m_t);
    out << line;
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

MetricsTrace read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open metrics csv: " + path);
  }
  std::string header;
  if (!std::getline(in, header) || header != "t,passes,samples_per_word,ll,wall_seconds,m_t") {
    throw IoError("unexpected metrics csv header in " + path);
  }
  MetricsTrace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    TraceRow row;
    char* cursor = line.data();
    char* end = nullptr;
    row.t = std::strtoll(cursor, &end, 10);
    double* fields[] = {&row.passes, &row.samples_per_word, &row.ll, &row.wall_seconds,
                        &row.m_t};
    for (double* field : fields) {
      if (*end != ',') {
        throw IoError("malformed metrics csv row in " + path);
      }
      cursor = end + 1;
      *field = std::strtod(cursor, &end);
    }
    trace.push_back(row);
  }
  return trace;
}

}  // namespace samelda
