#include "bgrass/random.hpp"

#include <cmath>

namespace bgrass {

Rng::Rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x9e3779b9u};
  engine_.seed(seq);
}

double Rng::uniform() {
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return normal_(engine_); }

double Rng::exponential() { return -std::log(uniform()); }

double Rng::gamma(double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double truncated_normal_lower(Rng& rng, double mean, double sd, double lower) {
  const double a = (lower - mean) / sd;
  if (a <= 0.45) {
    // Plain rejection accepts with probability >= 1 - Phi(0.45) ~ 0.33.
    while (true) {
      const double z = rng.normal();
      if (z >= a) return mean + sd * z;
    }
  }
  // Robert (1995) translated-exponential proposal for the tail.
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  while (true) {
    const double z = a + rng.exponential() / lambda;
    const double d = z - lambda;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return mean + sd * z;
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace bgrass
