#pragma once

#include <cstdint>
#include <random>

namespace bgrass {

// Per-chain random stream. Not thread-safe; each chain/replicate owns one.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  // Exponential with rate 1.
  double exponential();
  // Gamma with the given shape and rate (mean shape / rate).
  double gamma(double shape, double rate);
  bool bernoulli(double p);
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Draw from N(mean, sd^2) restricted to [lower, inf).
double truncated_normal_lower(Rng& rng, double mean, double sd, double lower);

// Standard normal CDF.
double normal_cdf(double x);

// Derive a well-mixed child seed (chain, replicate, grid point) from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace bgrass
