#include "bgrass/pg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bgrass::pg {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPi2 = kPi * kPi;
constexpr double kTrunc = 0.64;
constexpr int kMaxRejections = 10000;

// Coefficient a_n(x) of the alternating series for J*(1, 0).
double series_term(int n, double x) {
  const double k = n + 0.5;
  if (x <= kTrunc) {
    return kPi * k * std::pow(2.0 / (kPi * x), 1.5) * std::exp(-2.0 * k * k / x);
  }
  return kPi * k * std::exp(-0.5 * k * k * kPi2 * x);
}

// CDF at t of the inverse Gaussian IG(mean = 1/z, shape = 1).
double inverse_gaussian_cdf(double t, double z) {
  const double root = 1.0 / std::sqrt(t);
  const double left = normal_cdf(root * (t * z - 1.0));
  // exp(2z) * Phi(-root (tz + 1)), evaluated in log space to avoid overflow.
  const double tail = normal_cdf(-root * (t * z + 1.0));
  const double right = tail > 0.0 ? std::exp(2.0 * z + std::log(tail)) : 0.0;
  return left + right;
}

// IG(mean = 1/z, shape = 1) truncated to (0, t).
double truncated_inverse_gaussian(double z, Rng& rng) {
  const double mu = z > 0.0 ? 1.0 / z : std::numeric_limits<double>::infinity();
  double x = 0.0;
  if (mu > kTrunc) {
    for (int tries = 0;; ++tries) {
      if (tries > kMaxRejections) throw std::runtime_error("pg: truncated inverse-Gaussian rejection cap hit");
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      x = 1.0 + e1 * kTrunc;
      x = kTrunc / (x * x);
      if (std::log(rng.uniform()) < -0.5 * z * z * x) return x;
    }
  }
  for (int tries = 0;; ++tries) {
    if (tries > kMaxRejections) throw std::runtime_error("pg: inverse-Gaussian rejection cap hit");
    const double n = rng.normal();
    const double y = n * n;
    x = mu + 0.5 * mu * mu * y - 0.5 * mu * std::sqrt(4.0 * mu * y + (mu * y) * (mu * y));
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    if (x < kTrunc) return x;
  }
}

}  // namespace

double sample_pg1(double c, Rng& rng) {
  // PG(1, c) = J*(1, c/2) / 4.
  const double z = 0.5 * std::fabs(c);
  const double k = 0.125 * kPi2 + 0.5 * z * z;
  const double p = 0.5 * kPi / k * std::exp(-k * kTrunc);
  const double q = 2.0 * std::exp(-z) * inverse_gaussian_cdf(kTrunc, z);
  const double prob_right = p / (p + q);

  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    const double x = rng.uniform() < prob_right ? kTrunc + rng.exponential() / k
                                                : truncated_inverse_gaussian(z, rng);
    double s = series_term(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_term(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_term(n, x);
        if (y > s) break;
      }
    }
  }
  throw std::runtime_error("pg: PG(1, " + std::to_string(c) + ") exceeded 1e4 rejections");
}

double sample_pg(int b, double c, Rng& rng, int exact_max_b) {
  if (b < 1) throw std::invalid_argument("pg: b must be >= 1, got " + std::to_string(b));
  c = std::fabs(c);
  if (b <= exact_max_b) {
    double sum = 0.0;
    for (int i = 0; i < b; ++i) sum += sample_pg1(c, rng);
    return sum;
  }
  const double m = mean(b, c);
  const double sd = std::sqrt(variance(b, c));
  while (true) {
    const double w = m + sd * rng.normal();
    if (w > 0.0) return w;
  }
}

double mean(double b, double c) {
  c = std::fabs(c);
  if (c < 1e-6) return b * (0.25 - c * c / 48.0);
  return b * std::tanh(0.5 * c) / (2.0 * c);
}

double variance(double b, double c) {
  c = std::fabs(c);
  if (c < 1e-3) return b * (1.0 / 24.0 - c * c / 120.0);
  // sinh(c) / cosh^2(c/2) = 2 tanh(c/2); keeps large c finite.
  const double sech = 1.0 / std::cosh(0.5 * c);
  return b * (2.0 * std::tanh(0.5 * c) - c * sech * sech) / (4.0 * c * c * c);
}

double laplace_transform(double b, double c, double s) {
  const double num = std::log(std::cosh(0.5 * c));
  const double den = std::log(std::cosh(std::sqrt(0.25 * c * c + 0.5 * s)));
  return std::exp(b * (num - den));
}

}  // namespace bgrass::pg
