#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace samelda {

// Row-major dense matrix of doubles. Small on purpose; the kernels in this
// project are all hand-written sparse loops.
struct DenseMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::int64_t r, std::int64_t c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {}

  double& operator()(std::int64_t r, std::int64_t c) {
    return data[static_cast<std::size_t>(r * cols + c)];
  }
  double operator()(std::int64_t r, std::int64_t c) const {
    return data[static_cast<std::size_t>(r * cols + c)];
  }
  std::span<double> row(std::int64_t r) {
    return {data.data() + r * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(std::int64_t r) const {
    return {data.data() + r * cols, static_cast<std::size_t>(cols)};
  }
};

DenseMatrix transposed(const DenseMatrix& m);

// Topic model state. phi rows are topic-word distributions and sum to 1
// after every update; theta rows are smoothed per-document topic weights and
// are deliberately left unnormalized.
struct Model {
  std::int64_t n_topics = 0;  // K
  std::int64_t n_words = 0;   // W
  double alpha = 0.1;
  double beta = 0.01;
  DenseMatrix phi;    // K x W
  DenseMatrix theta;  // D x K
};

// Fresh model: phi rows uniform (the row-normalization of zero counts plus
// beta smoothing), theta entries alpha + 1/K.
Model init_model(std::int64_t n_topics, std::int64_t n_words, std::int64_t n_docs,
                 double alpha, double beta);

// Checkpoint layout (little-endian, documented in README.md):
//   bytes 0..7   magic "SAMELDA1"
//   u32          format version (1)
//   u64 K, u64 W
//   f64 alpha, f64 beta
//   K*W f64      phi, row-major
// theta is not checkpointed; evaluation re-estimates document weights.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace samelda
