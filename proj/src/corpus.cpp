#include "samelda/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "samelda/errors.hpp"
#include "samelda/rng.hpp"

namespace samelda {

std::int64_t Corpus::doc_tokens(std::int64_t d) const {
  const auto begin = doc_offsets[static_cast<std::size_t>(d)];
  const auto end = doc_offsets[static_cast<std::size_t>(d) + 1];
  std::int64_t total = 0;
  for (auto i = begin; i < end; ++i) {
    total += counts[static_cast<std::size_t>(i)];
  }
  return total;
}

std::span<const std::int32_t> Corpus::doc_words(std::int64_t d) const {
  const auto begin = doc_offsets[static_cast<std::size_t>(d)];
  return {word_ids.data() + begin, static_cast<std::size_t>(doc_nnz(d))};
}

std::span<const std::int32_t> Corpus::doc_counts(std::int64_t d) const {
  const auto begin = doc_offsets[static_cast<std::size_t>(d)];
  return {counts.data() + begin, static_cast<std::size_t>(doc_nnz(d))};
}

namespace {

std::int64_t read_header_int(std::istream& in, const char* what) {
  std::int64_t value = 0;
  if (!(in >> value)) {
    throw IoError(std::string("malformed docword header: missing ") + what);
  }
  return value;
}

struct Triplet {
  std::int64_t doc, word, count;
};

bool read_triplet(std::istream& in, Triplet& t) {
  if (!(in >> t.doc)) {
    return false;
  }
  if (!(in >> t.word >> t.count)) {
    throw IoError("malformed docword entry: incomplete triplet");
  }
  return true;
}

}  // namespace

Corpus load_uci_bow(const std::string& docword_path, const std::string& vocab_path) {
  std::ifstream in(docword_path);
  if (!in) {
    throw IoError("cannot open docword file: " + docword_path);
  }
  const std::int64_t n_docs = read_header_int(in, "document count");
  const std::int64_t n_words = read_header_int(in, "vocabulary size");
  const std::int64_t n_nnz = read_header_int(in, "nonzero count");
  if (n_docs < 1 || n_words < 1 || n_nnz < 0) {
    throw IoError("malformed docword header: nonpositive dimension");
  }

  // Pass 1: validate triplets and size the rows.
  std::vector<std::int64_t> row_sizes(static_cast<std::size_t>(n_docs), 0);
  Triplet t;
  std::int64_t seen = 0;
  while (read_triplet(in, t)) {
    if (t.doc < 1 || t.doc > n_docs) {
      throw IoError("docword entry out of declared range: docID " + std::to_string(t.doc));
    }
    if (t.word < 1 || t.word > n_words) {
      throw IoError("docword entry out of declared range: wordID " + std::to_string(t.word));
    }
    if (t.count < 1) {
      throw IoError("docword entry with count <= 0 at docID " + std::to_string(t.doc));
    }
    ++seen;
    if (seen > n_nnz) {
      throw IoError("docword file has more triplets than the declared NNZ");
    }
    ++row_sizes[static_cast<std::size_t>(t.doc - 1)];
  }
  if (seen != n_nnz) {
    throw IoError("docword file declares NNZ=" + std::to_string(n_nnz) + " but has " +
                  std::to_string(seen) + " triplets");
  }

  // Pass 2: fill CSR rows in file order.
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(n_docs) + 1, 0);
  for (std::int64_t d = 0; d < n_docs; ++d) {
    offsets[static_cast<std::size_t>(d) + 1] =
        offsets[static_cast<std::size_t>(d)] + row_sizes[static_cast<std::size_t>(d)];
  }
  std::vector<std::int32_t> words(static_cast<std::size_t>(n_nnz));
  std::vector<std::int32_t> cnts(static_cast<std::size_t>(n_nnz));
  {
    std::ifstream in2(docword_path);
    std::int64_t skip;
    in2 >> skip >> skip >> skip;
    std::vector<std::int64_t> fill(offsets.begin(), offsets.end() - 1);
    while (read_triplet(in2, t)) {
      auto& pos = fill[static_cast<std::size_t>(t.doc - 1)];
      words[static_cast<std::size_t>(pos)] = static_cast<std::int32_t>(t.word - 1);
      cnts[static_cast<std::size_t>(pos)] = static_cast<std::int32_t>(t.count);
      ++pos;
    }
  }

  // Sort each row by word id and merge duplicates by summing counts.
  Corpus corpus;
  corpus.n_words = n_words;
  corpus.doc_offsets.push_back(0);
  std::vector<std::pair<std::int32_t, std::int64_t>> row;
  std::int64_t dropped = 0;
  for (std::int64_t d = 0; d < n_docs; ++d) {
    row.clear();
    for (auto i = offsets[static_cast<std::size_t>(d)];
         i < offsets[static_cast<std::size_t>(d) + 1]; ++i) {
      row.emplace_back(words[static_cast<std::size_t>(i)], cnts[static_cast<std::size_t>(i)]);
    }
    if (row.empty()) {
      ++dropped;
      continue;
    }
    std::sort(row.begin(), row.end());
    std::size_t out = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
      if (row[i].first == row[out].first) {
        row[out].second += row[i].second;
      } else {
        row[++out] = row[i];
      }
    }
    row.resize(out + 1);
    for (const auto& [w, c] : row) {
      if (c > std::numeric_limits<std::int32_t>::max()) {
        throw IoError("merged count overflows at docID " + std::to_string(d + 1));
      }
      corpus.word_ids.push_back(w);
      corpus.counts.push_back(static_cast<std::int32_t>(c));
      corpus.n_tokens += c;
    }
    corpus.doc_offsets.push_back(corpus.nnz());
  }
  corpus.n_docs = static_cast<std::int64_t>(corpus.doc_offsets.size()) - 1;
  if (dropped > 0) {
    std::fprintf(stderr, "load_uci_bow: dropped %lld empty document(s)\n",
                 static_cast<long long>(dropped));
  }
  if (corpus.n_docs == 0) {
    throw IoError("docword file contains no non-empty documents");
  }

  std::ifstream vin(vocab_path);
  if (!vin) {
    throw IoError("cannot open vocab file: " + vocab_path);
  }
  std::string line;
  while (std::getline(vin, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    corpus.vocab.push_back(line);
  }
  // A single trailing blank line (file ending in "\n\n") is not tolerated:
  // the vocabulary must have exactly W entries.
  if (static_cast<std::int64_t>(corpus.vocab.size()) != n_words) {
    throw IoError("vocab length mismatch: docword declares W=" + std::to_string(n_words) +
                  " but vocab file has " + std::to_string(corpus.vocab.size()) + " lines");
  }
  return corpus;
}

void save_uci_bow(const Corpus& corpus, const std::string& docword_path,
                  const std::string& vocab_path) {
  std::ofstream out(docword_path);
  if (!out) {
    throw IoError("cannot write docword file: " + docword_path);
  }
  out << corpus.n_docs << "\n" << corpus.n_words << "\n" << corpus.nnz() << "\n";
  for (std::int64_t d = 0; d < corpus.n_docs; ++d) {
    const auto words = corpus.doc_words(d);
    const auto cnts = corpus.doc_counts(d);
    for (std::size_t i = 0; i < words.size(); ++i) {
      out << (d + 1) << " " << (words[i] + 1) << " " << cnts[i] << "\n";
    }
  }
  if (!out) {
    throw IoError("write failed: " + docword_path);
  }
  std::ofstream vout(vocab_path);
  if (!vout) {
    throw IoError("cannot write vocab file: " + vocab_path);
  }
  for (const auto& token : corpus.vocab) {
    vout << token << "\n";
  }
  if (!vout) {
    throw IoError("write failed: " + vocab_path);
  }
}

Corpus subset_corpus(const Corpus& corpus, std::span<const std::int32_t> doc_ids) {
  Corpus out;
  out.n_words = corpus.n_words;
  out.vocab = corpus.vocab;
  out.n_docs = static_cast<std::int64_t>(doc_ids.size());
  out.doc_offsets.push_back(0);
  for (const auto d : doc_ids) {
    const auto words = corpus.doc_words(d);
    const auto cnts = corpus.doc_counts(d);
    out.word_ids.insert(out.word_ids.end(), words.begin(), words.end());
    out.counts.insert(out.counts.end(), cnts.begin(), cnts.end());
    out.n_tokens += corpus.doc_tokens(d);
    out.doc_offsets.push_back(out.nnz());
  }
  return out;
}

std::pair<Corpus, Corpus> split_holdout(const Corpus& corpus, double test_fraction,
                                        std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("split_holdout: test_fraction must be in (0,1)");
  }
  if (corpus.n_docs < 2) {
    throw ConfigError("split_holdout: corpus needs at least 2 documents");
  }
  auto stream = stream_for(seed, {0, 0, 0, make_tag(StreamPurpose::holdout_split)});
  const auto order = shuffled_indices(corpus.n_docs, stream);
  auto n_test = static_cast<std::int64_t>(
      std::llround(test_fraction * static_cast<double>(corpus.n_docs)));
  n_test = std::clamp<std::int64_t>(n_test, 1, corpus.n_docs - 1);

  std::vector<std::int32_t> test_ids(order.begin(), order.begin() + n_test);
  std::vector<std::int32_t> train_ids(order.begin() + n_test, order.end());
  std::sort(test_ids.begin(), test_ids.end());
  std::sort(train_ids.begin(), train_ids.end());
  return {subset_corpus(corpus, train_ids), subset_corpus(corpus, test_ids)};
}

MinibatchStream::MinibatchStream(const Corpus& corpus, double batch_fraction,
                                 std::uint64_t seed)
    : corpus_(&corpus), seed_(seed) {
  if (!(batch_fraction > 0.0 && batch_fraction <= 1.0)) {
    throw ConfigError("minibatch_stream: batch_fraction must be in (0,1]");
  }
  batch_size_ = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(
             std::llround(batch_fraction * static_cast<double>(corpus.n_docs))));
  start_pass();
}

std::int64_t MinibatchStream::batches_per_pass() const {
  return (corpus_->n_docs + batch_size_ - 1) / batch_size_;
}

void MinibatchStream::start_pass() {
  auto stream =
      stream_for(seed_, {pass_, 0, 0, make_tag(StreamPurpose::batch_shuffle)});
  order_ = shuffled_indices(corpus_->n_docs, stream);
  cursor_ = 0;
}

MiniBatch MinibatchStream::next() {
  if (cursor_ >= corpus_->n_docs) {
    ++pass_;
    start_pass();
  }
  const auto take = std::min<std::int64_t>(batch_size_, corpus_->n_docs - cursor_);
  MiniBatch batch;
  batch.doc_ids.assign(order_.begin() + cursor_, order_.begin() + cursor_ + take);
  cursor_ += take;
  return batch;
}

}  // namespace samelda
