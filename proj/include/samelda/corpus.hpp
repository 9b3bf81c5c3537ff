#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace samelda {

// Immutable bag-of-words corpus in compressed sparse row form over documents.
// Word ids inside each row are strictly increasing, counts are >= 1, and
// doc_offsets.back() == nnz(). Safe for shared read access from any number of
// workers once built.
struct Corpus {
  std::int64_t n_docs = 0;
  std::int64_t n_words = 0;   // vocabulary size W, shared across splits
  std::int64_t n_tokens = 0;  // sum of all counts
  std::vector<std::int64_t> doc_offsets;  // size n_docs + 1
  std::vector<std::int32_t> word_ids;     // size nnz
  std::vector<std::int32_t> counts;       // size nnz
  std::vector<std::string> vocab;         // size n_words

  std::int64_t nnz() const { return static_cast<std::int64_t>(word_ids.size()); }
  std::int64_t doc_nnz(std::int64_t d) const {
    return doc_offsets[static_cast<std::size_t>(d) + 1] -
           doc_offsets[static_cast<std::size_t>(d)];
  }
  std::int64_t doc_tokens(std::int64_t d) const;
  std::span<const std::int32_t> doc_words(std::int64_t d) const;
  std::span<const std::int32_t> doc_counts(std::int64_t d) const;
};

// A subset of documents examined in one period. Rows are viewed through the
// parent corpus; nothing is copied.
struct MiniBatch {
  std::vector<std::int32_t> doc_ids;  // distinct, each < corpus.n_docs
};

// Reads the UCI bag-of-words pair: a docword file with three integer header
// lines D, W, NNZ followed by NNZ "docID wordID count" triplets (1-based),
// and a vocabulary file with exactly W lines. Duplicate (doc, word) entries
// are merged by summing counts; documents left without tokens are dropped
// with a note on stderr. Malformed input is a hard IoError, including a
// vocabulary whose length disagrees with the header.
Corpus load_uci_bow(const std::string& docword_path, const std::string& vocab_path);

// Writes the exact format load_uci_bow reads. Loading the result reproduces
// the corpus field for field.
void save_uci_bow(const Corpus& corpus, const std::string& docword_path,
                  const std::string& vocab_path);

// Partitions documents by a seeded shuffle into train/test sharing the
// vocabulary. The test side gets round(test_fraction * D) documents, clamped
// so neither side is empty. Requires at least 2 documents.
std::pair<Corpus, Corpus> split_holdout(const Corpus& corpus, double test_fraction,
                                        std::uint64_t seed);

// Corpus restricted to the given (sorted, distinct) document ids.
Corpus subset_corpus(const Corpus& corpus, std::span<const std::int32_t> doc_ids);

// Endless sequence of minibatches. Each pass reshuffles the documents with
// the pass index folded into the stream key and chunks them into
// ceil(D / batch_size) batches, so one pass covers every document exactly
// once. batch_size = max(1, round(batch_fraction * D)).
class MinibatchStream {
 public:
  MinibatchStream(const Corpus& corpus, double batch_fraction, std::uint64_t seed);

  MiniBatch next();

  std::int64_t batch_size() const { return batch_size_; }
  std::int64_t batches_per_pass() const;

 private:
  void start_pass();

  const Corpus* corpus_;
  std::uint64_t seed_;
  std::int64_t batch_size_;
  std::uint32_t pass_ = 0;
  std::int64_t cursor_ = 0;
  std::vector<std::int32_t> order_;
};

}  // namespace samelda
