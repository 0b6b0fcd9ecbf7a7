#pragma once

// Polya-Gamma PG(b, c) sampling for integer b >= 1.

#include "bgrass/random.hpp"

namespace bgrass::pg {

inline constexpr int kDefaultExactMaxB = 64;

// Exact PG(1, c) draw (Devroye-style alternating series, truncation point 0.64).
// Throws std::runtime_error if the rejection loop exceeds 1e4 attempts.
double sample_pg1(double c, Rng& rng);

// PG(b, c): sum of b exact PG(1, c) draws when b <= exact_max_b, otherwise a
// moment-matched normal restricted to (0, inf).
double sample_pg(int b, double c, Rng& rng, int exact_max_b = kDefaultExactMaxB);

// E[PG(b, c)] = (b / 2c) tanh(c / 2), b / 4 at c = 0.
double mean(double b, double c);
// Var[PG(b, c)] = b (sinh c - c) / (4 c^3 cosh^2(c / 2)), b / 24 at c = 0.
double variance(double b, double c);
// E[exp(-s w)] for w ~ PG(b, c).
double laplace_transform(double b, double c, double s);

}  // namespace bgrass::pg
