#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace samelda {

// Identifies one random stream. With a fixed master seed, distinct keys give
// statistically independent draw sequences, and the same key always replays
// the same sequence. Workers can therefore build any stream at any time with
// no shared state, which makes every sampling result independent of thread
// count and scheduling.
struct StreamKey {
  std::uint32_t t = 0;  // period / sweep / pass index
  std::uint32_t doc = 0;
  std::uint32_t word = 0;
  std::uint32_t tag = 0;  // purpose bits, see make_tag()
};

enum class StreamPurpose : std::uint32_t {
  poisson_counts = 1,
  batch_shuffle = 2,
  holdout_split = 3,
  cgs_init = 4,
  cgs_sweep = 5,
  eval_split = 6,
  synthetic = 7,
  phi_init = 8,
};

// tag layout: [purpose:4][sub:8][index:20]. `sub` carries the inner-sweep
// index, `index` the topic. Bounds are enforced by SamplerConfig validation.
constexpr std::uint32_t make_tag(StreamPurpose purpose, std::uint32_t sub = 0,
                                 std::uint32_t index = 0) {
  return (static_cast<std::uint32_t>(purpose) << 28) | ((sub & 0xffu) << 20) |
         (index & 0xfffffu);
}

// Counter-based generator (Philox 4x32-10, Salmon et al. SC'11). The key
// fields select the stream; successive blocks walk the counter's first word
// only, so streams never alias each other.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, StreamKey key);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0,1), 53-bit resolution.
  double uniform();
  // Uniform on (0,1); strictly inside, safe as a log argument.
  double uniform_oo();
  // Unbiased integer in [0, n), n >= 1.
  std::uint64_t uniform_below(std::uint64_t n);

 private:
  void refill();

  std::array<std::uint32_t, 4> base_counter_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> buffer_{};
  std::uint32_t block_ = 0;
  int pos_ = 4;  // buffer exhausted; first use refills
};

RandomStream stream_for(std::uint64_t master_seed, StreamKey key);

// Exact Poisson(lambda) variate: inversion by sequential search below
// lambda = 10, Hormann's transformed rejection (PTRS) at or above it.
// Throws NumericalError for NaN or negative lambda.
std::int64_t poisson_sample(double lambda, RandomStream& stream);

// Index k with probability weights[k] / sum(weights). Throws NumericalError
// when the weights are all zero or contain NaN/negative entries.
int categorical_sample(std::span<const double> weights, RandomStream& stream);

// Fisher-Yates permutation of 0..n-1 driven by `stream`.
std::vector<std::int32_t> shuffled_indices(std::int64_t n, RandomStream& stream);

}  // namespace samelda
