#include "samelda/rng.hpp"

#include <cmath>
#include <limits>

#include "samelda/errors.hpp"

namespace samelda {

namespace {

constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85u;
constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57u;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo,
                      std::uint32_t& hi) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(product);
  hi = static_cast<std::uint32_t>(product >> 32);
}

std::array<std::uint32_t, 4> philox_block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mul_hi_lo(kPhiloxM4x32A, ctr[0], lo0, hi0);
    mul_hi_lo(kPhiloxM4x32B, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW32A;
    key[1] += kPhiloxW32B;
  }
  return ctr;
}

// Inversion by sequential search on the cdf (Devroye ch. X). Expected
// iteration count is lambda + 1, used only for lambda < 10.
std::int64_t poisson_inversion(double lambda, RandomStream& stream) {
  const double u = stream.uniform();
  double pmf = std::exp(-lambda);
  double cdf = pmf;
  std::int64_t k = 0;
  // cdf can saturate just below 1 in floating point; the hard cap keeps the
  // loop finite for the (astronomically unlikely) u beyond it.
  while (u > cdf && k < 1000) {
    ++k;
    pmf *= lambda / static_cast<double>(k);
    cdf += pmf;
  }
  return k;
}

// Transformed rejection with squeeze (PTRS), Hormann 1993, valid for
// lambda >= 10. Constants are the ones from the paper defining the
// dominating distribution G(u) = (2a/(1-2|u|) + b)u + lambda + 0.43.
std::int64_t poisson_ptrs(double lambda, RandomStream& stream) {
  const double log_lambda = std::log(lambda);
  const double b = 0.931 + 2.53 * std::sqrt(lambda);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);

  for (;;) {
    const double u = stream.uniform_oo() - 0.5;
    const double v = stream.uniform_oo();
    const double u_shifted = 0.5 - std::abs(u);
    const double g = (2.0 * a / u_shifted + b) * u + lambda + 0.43;

    if (u_shifted >= 0.07 && v <= v_r) {
      return static_cast<std::int64_t>(g);
    }
    if (g < 0.0 || g > 9.0e18 ||
        (u_shifted < 0.013 && v > u_shifted)) {
      continue;
    }
    const std::int64_t k = static_cast<std::int64_t>(g);
    const double lhs =
        std::log(v * inv_alpha / (a / (u_shifted * u_shifted) + b));
    const double rhs = -lambda + static_cast<double>(k) * log_lambda -
                       std::lgamma(static_cast<double>(k) + 1.0);
    if (lhs <= rhs) {
      return k;
    }
  }
}

}  // namespace

RandomStream::RandomStream(std::uint64_t master_seed, StreamKey key)
    : base_counter_{0u, key.word, key.doc, key.t},
      key_{static_cast<std::uint32_t>(master_seed) ^ (key.tag * kPhiloxM4x32A),
           static_cast<std::uint32_t>(master_seed >> 32) ^
               (key.tag * kPhiloxM4x32B)} {}

void RandomStream::refill() {
  std::array<std::uint32_t, 4> ctr = base_counter_;
  ctr[0] = block_++;  // wraps after 2^32 blocks; never carries into the key fields
  buffer_ = philox_block(ctr, key_);
  pos_ = 0;
}

std::uint32_t RandomStream::next_u32() {
  if (pos_ == 4) {
    refill();
  }
  return buffer_[pos_++];
}

std::uint64_t RandomStream::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform_oo() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t RandomStream::uniform_below(std::uint64_t n) {
  // Accept draws in [2^64 mod n, 2^64), which is an exact multiple of n wide.
  const std::uint64_t rem = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= rem) {
      return (x - rem) % n;
    }
  }
}

RandomStream stream_for(std::uint64_t master_seed, StreamKey key) {
  return RandomStream(master_seed, key);
}

std::int64_t poisson_sample(double lambda, RandomStream& stream) {
  if (std::isnan(lambda) || lambda < 0.0 || !std::isfinite(lambda)) {
    throw NumericalError("poisson_sample: lambda must be finite and nonnegative");
  }
  if (lambda == 0.0) {
    return 0;
  }
  if (lambda < 10.0) {
    return poisson_inversion(lambda, stream);
  }
  return poisson_ptrs(lambda, stream);
}

int categorical_sample(std::span<const double> weights, RandomStream& stream) {
  double total = 0.0;
  for (const double w : weights) {
    if (std::isnan(w) || w < 0.0) {
      throw NumericalError("categorical_sample: weights must be nonnegative");
    }
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericalError("categorical_sample: weights must have positive finite sum");
  }
  const double u = stream.uniform() * total;
  double cum = 0.0;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    cum += weights[k];
    if (u < cum) {
      return static_cast<int>(k);
    }
  }
  // Rounding can push u past the last partial sum; fall back to the last
  // index carrying positive weight.
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] > 0.0) {
      return static_cast<int>(k);
    }
  }
  return 0;  // unreachable: total > 0 implies a positive weight exists
}

std::vector<std::int32_t> shuffled_indices(std::int64_t n, RandomStream& stream) {
  std::vector<std::int32_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
  }
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(
        stream.uniform_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

}  // namespace samelda
