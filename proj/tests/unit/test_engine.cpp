#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bgrass/engine.hpp"
#include "bgrass/simgen.hpp"

using namespace bgrass;

namespace {

StratifiedCells cells_with(int strata, int num_aes, int trials, int events) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(strata, 1);
  Eigen::VectorXd v(strata);
  for (int s = 0; s < strata; ++s) v(s) = s % 2;
  return make_cells(x, v, Eigen::VectorXi::Constant(strata, trials), Eigen::MatrixXi::Constant(strata, num_aes, events));
}

CorrelationStructure pair_corr(Epsilon eps) {
  return correlation_from_graph(graph_from_groups(2, {{"G", {0, 1}}}), eps);
}

ChainState zero_state(const GibbsSampler& g) {
  ChainState s;
  const int j = g.num_aes(), p = g.num_predictors(), n = g.num_strata();
  s.alpha = Eigen::MatrixXd::Zero(j, p);
  s.beta_ss = Eigen::VectorXd::Zero(j);
  s.sigma_beta = Eigen::VectorXd::Ones(j);
  s.delta = Eigen::VectorXi::Zero(j);
  s.tau2 = Eigen::VectorXd::Ones(j);
  s.sigma_alpha2 = Eigen::VectorXd::Ones(p);
  s.omega = Eigen::MatrixXd::Ones(n, j);
  return s;
}

}  // namespace

TEST_CASE("omega update at psi = 0 and at large psi") {
  const auto cells = cells_with(6, 2, 1, 0);
  const auto corr = pair_corr(Epsilon::infinite());
  GibbsSampler g(cells, corr, Hyperparams{}, 1);
  g.set_state(zero_state(g));
  double sum = 0.0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    g.update_omega();
    sum += g.state().omega.sum();
  }
  CHECK(sum / (reps * 12.0) == doctest::Approx(0.25).epsilon(0.01));

  auto s = zero_state(g);
  s.alpha.col(0).setConstant(20.0);
  g.set_state(s);
  sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    g.update_omega();
    sum += g.state().omega.sum();
  }
  CHECK(sum / (reps * 12.0) == doctest::Approx(std::tanh(10.0) / 40.0).epsilon(0.01));
}

TEST_CASE("alpha posterior is centered when kappa = 0 and the prior is flat") {
  const auto cells = cells_with(1, 1, 10, 5);
  const auto corr = correlation_from_graph(graph_from_groups(1, {}), Epsilon::infinite());
  GibbsSampler g(cells, corr, Hyperparams{}, 2);
  auto s = zero_state(g);
  s.sigma_alpha2.setConstant(1e12);
  double sum = 0.0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    g.set_state(s);
    g.update_alpha(0);
    sum += g.state().alpha(0, 0);
  }
  // Posterior sd is 1 (omega = 1), so the mean of 2e4 draws has sd 0.007.
  CHECK(std::abs(sum / reps) < 0.03);
}

TEST_CASE("alpha recovers a known intercept") {
  // 40 strata of 200 trials at logit(p) = -1.5.
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(40, 1);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(40);
  Eigen::VectorXi n = Eigen::VectorXi::Constant(40, 200);
  Eigen::MatrixXi y(40, 1);
  Rng data_rng(3);
  const double p = 1.0 / (1.0 + std::exp(1.5));
  for (int s = 0; s < 40; ++s) {
    int c = 0;
    for (int i = 0; i < 200; ++i) c += data_rng.uniform() < p;
    y(s, 0) = c;
  }
  const auto cells = make_cells(x, v, n, y);
  const auto corr = correlation_from_graph(graph_from_groups(1, {}), Epsilon::infinite());
  const auto draws = run_chain(cells, corr, Hyperparams{}, Schedule{3000, 1000, 1}, 4);
  double mean = 0.0, m2 = 0.0;
  for (int t = 0; t < draws.num_draws; ++t) mean += draws.alpha_at(t, 0, 0);
  mean /= draws.num_draws;
  for (int t = 0; t < draws.num_draws; ++t) m2 += std::pow(draws.alpha_at(t, 0, 0) - mean, 2);
  const double sd = std::sqrt(m2 / draws.num_draws);
  CHECK(std::abs(mean + 1.5) < 3.0 * sd);
}

TEST_CASE("beta_ss with every delta = 0 follows the prior correlation") {
  const auto cells = cells_with(4, 2, 5, 1);
  const auto corr = pair_corr(Epsilon::finite(1.0));
  GibbsSampler g(cells, corr, Hyperparams{}, 5);
  g.set_state(zero_state(g));
  const int reps = 20000;
  double s11 = 0, s22 = 0, s12 = 0;
  for (int r = 0; r < reps; ++r) {
    g.update_beta_ss();
    const auto& b = g.state().beta_ss;
    s11 += b(0) * b(0);
    s22 += b(1) * b(1);
    s12 += b(0) * b(1);
  }
  CHECK(s11 / reps == doctest::Approx(1.0).epsilon(0.04));
  CHECK(s22 / reps == doctest::Approx(1.0).epsilon(0.04));
  CHECK(s12 / std::sqrt(s11 * s22) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("beta_ss under massive evidence for one AE") {
  // Omega = I; AE 0 has huge balanced evidence with a single-AE conjugate oracle.
  const auto cells = cells_with(2, 2, 1, 0);
  const auto corr = pair_corr(Epsilon::infinite());
  GibbsSampler g(cells, corr, Hyperparams{}, 6);
  auto s = zero_state(g);
  s.delta << 1, 0;
  s.sigma_beta << 1.0, 1.0;
  s.omega.setConstant(1000.0);
  g.set_state(s);
  g.set_events((Eigen::MatrixXi(2, 2) << 0, 0, 1, 0).finished());
  // kappa at the V = 1 stratum is 1 - 1/2 = 0.5; precision 1 + 1000, mean 0.5 / 1001.
  double sum0 = 0.0, sum1 = 0.0, sq1 = 0.0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    g.update_beta_ss();
    sum0 += g.state().beta_ss(0);
    sum1 += g.state().beta_ss(1);
    sq1 += std::pow(g.state().beta_ss(1), 2);
  }
  CHECK(sum0 / reps == doctest::Approx(0.5 / 1001.0).epsilon(0.05));
  CHECK(std::abs(sum1 / reps) < 0.03);
  CHECK(sq1 / reps == doctest::Approx(1.0).epsilon(0.04));
}

TEST_CASE("sigma_beta with delta = 0 is folded normal") {
  const auto cells = cells_with(2, 1, 3, 1);
  const auto corr = correlation_from_graph(graph_from_groups(1, {}), Epsilon::infinite());
  GibbsSampler g(cells, corr, Hyperparams{}, 7);
  auto s = zero_state(g);
  s.tau2 << 4.0;
  s.beta_ss << 1.3;
  g.set_state(s);
  double sum = 0.0;
  const int reps = 50000;
  for (int r = 0; r < reps; ++r) {
    g.update_sigma_beta(0);
    REQUIRE(g.state().sigma_beta(0) >= 0.0);
    sum += g.state().sigma_beta(0);
  }
  CHECK(sum / reps == doctest::Approx(2.0 * std::sqrt(2.0 / std::numbers::pi)).epsilon(0.01));
}

TEST_CASE("sigma_beta far from the truncation point") {
  const auto cells = cells_with(2, 1, 1000, 0);
  const auto corr = correlation_from_graph(graph_from_groups(1, {}), Epsilon::infinite());
  GibbsSampler g(cells, corr, Hyperparams{}, 8);
  g.set_events((Eigen::MatrixXi(2, 1) << 0, 1000).finished());
  auto s = zero_state(g);
  s.delta << 1;
  s.beta_ss << 1.0;
  s.omega.setConstant(400.0);
  s.tau2 << 1e6;
  g.set_state(s);
  // V = 1 stratum only: quad = 400, lin = kappa = 500.
  const double prec = 1e-6 + 400.0;
  const double loc = 500.0 / prec;
  const double sd = 1.0 / std::sqrt(prec);
  // Truncated-normal mean: loc + sd * phi(a) / (1 - Phi(a)), a = -loc / sd.
  const double a = -loc / sd;
  const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
  const double oracle = loc + sd * phi / (0.5 * std::erfc(a / std::sqrt(2.0)));
  CHECK(oracle == doctest::Approx(loc).epsilon(1e-12));
  double sum = 0.0;
  const int reps = 50000;
  for (int r = 0; r < reps; ++r) {
    g.update_sigma_beta(0);
    sum += g.state().sigma_beta(0);
  }
  CHECK(sum / reps == doctest::Approx(oracle).epsilon(0.001));
}

TEST_CASE("delta update without evidence and with strong evidence") {
  const auto cells = cells_with(2, 1, 4, 2);
  const auto corr = correlation_from_graph(graph_from_groups(1, {}), Epsilon::infinite());
  Hyperparams h;
  h.pi = {0.3};
  GibbsSampler g(cells, corr, h, 9);
  auto s = zero_state(g);
  s.beta_ss << 0.0;
  g.set_state(s);
  int ones = 0;
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    g.update_delta(0);
    ones += g.state().delta(0);
  }
  CHECK(ones / double(reps) == doctest::Approx(0.3).epsilon(0.03));

  g.set_events((Eigen::MatrixXi(2, 1) << 2, 4).finished());
  s.beta_ss << 5.0;
  s.omega.setConstant(0.01);
  g.set_state(s);
  ones = 0;
  for (int r = 0; r < 1000; ++r) {
    g.update_delta(0);
    ones += g.state().delta(0);
  }
  CHECK(ones == 1000);
}

TEST_CASE("delta matches the exact two-point posterior") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
  Eigen::VectorXd v(3);
  v << 0, 1, 1;
  Eigen::VectorXi n(3);
  n << 2, 3, 1;
  Eigen::MatrixXi y(3, 1);
  y << 1, 2, 0;
  const auto cells = make_cells(x, v, n, y);
  const auto corr = correlation_from_graph(graph_from_groups(1, {}), Epsilon::infinite());
  GibbsSampler g(cells, corr, Hyperparams{}, 10);
  auto s = zero_state(g);
  s.alpha << -0.2;
  s.beta_ss << 0.6;
  s.sigma_beta << 0.9;
  s.omega << 0.4, 0.7, 0.2;
  g.set_state(s);
  // Augmented likelihood exp(kappa psi - omega psi^2 / 2) for both delta values.
  auto log_lik = [&](int delta) {
    double ll = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double psi = -0.2 + v(i) * delta * 0.9 * 0.6;
      const double kappa = y(i, 0) - n(i) / 2.0;
      ll += kappa * psi - 0.5 * s.omega(i, 0) * psi * psi;
    }
    return ll;
  };
  const double w1 = 0.5 * std::exp(log_lik(1)), w0 = 0.5 * std::exp(log_lik(0));
  const double exact = w1 / (w0 + w1);
  int ones = 0;
  const int reps = 100000;
  for (int r = 0; r < reps; ++r) {
    g.update_delta(0);
    ones += g.state().delta(0);
  }
  const double se = std::sqrt(exact * (1 - exact) / reps);
  CHECK(std::abs(ones / double(reps) - exact) < 4 * se);
}

TEST_CASE("variance updates with zero alpha") {
  const auto cells = cells_with(2, 3, 2, 1);
  const auto corr = correlation_from_graph(graph_from_groups(3, {}), Epsilon::infinite());
  Hyperparams h;
  h.a_alpha = 2.0;
  h.b_alpha = 3.0;
  GibbsSampler g(cells, corr, h, 11);
  g.set_state(zero_state(g));
  double sum = 0.0;
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    g.update_variances();
    sum += 1.0 / g.state().sigma_alpha2(0);
  }
  // Gamma(a + J/2, rate b) has mean (2 + 1.5) / 3.
  CHECK(sum / reps == doctest::Approx(3.5 / 3.0).epsilon(0.01));
}

TEST_CASE("prior marginal of sigma_beta is half-t") {
  // With delta = 0 the (tau2, sigma) updates form a Gibbs sampler on the prior.
  const auto cells = cells_with(2, 1, 2, 1);
  const auto corr = correlation_from_graph(graph_from_groups(1, {}), Epsilon::infinite());
  Hyperparams h;
  h.k = 3.0;
  GibbsSampler g(cells, corr, h, 12);
  g.set_state(zero_state(g));
  std::vector<double> draws;
  for (int r = 0; r < 60000; ++r) {
    g.update_variances();
    g.update_sigma_beta(0);
    if (r % 3 == 0) draws.push_back(g.state().sigma_beta(0));
  }
  std::sort(draws.begin(), draws.end());
  // Half-t(3) CDF: 2 F_t3(x) - 1, with F_t3 in closed form.
  auto cdf = [](double x) {
    const double t = x / std::sqrt(3.0);
    const double f = 0.5 + (std::atan(t) + t / (1.0 + t * t)) / std::numbers::pi;
    return 2.0 * f - 1.0;
  };
  double ks = 0.0;
  const double n = draws.size();
  for (std::size_t i = 0; i < draws.size(); ++i)
    ks = std::max({ks, std::abs(cdf(draws[i]) - i / n), std::abs(cdf(draws[i]) - (i + 1) / n)});
  // Chain is nearly independent after thinning; 1.63/sqrt(n) is the 1% KS critical value.
  CHECK(ks < 2.0 * 1.63 / std::sqrt(n));
}

TEST_CASE("run_chain bookkeeping") {
  const auto sim = generate_sim1(Sim1Design{}, 3);
  const auto corr = correlation_from_graph(sim.graph, Epsilon::finite(0.1));
  const auto empty = run_chain(sim.cells, corr, Hyperparams{}, Schedule{50, 50, 1}, 1);
  CHECK(empty.num_draws == 0);
  CHECK(empty.beta.empty());

  const Schedule sched{120, 20, 4};
  const auto a = run_chain(sim.cells, corr, Hyperparams{}, sched, 7);
  const auto b = run_chain(sim.cells, corr, Hyperparams{}, sched, 7);
  CHECK(a.num_draws == 25);
  CHECK(a.beta == b.beta);
  CHECK(a.delta == b.delta);
  CHECK(a.alpha == b.alpha);
  CHECK(a.deviance == b.deviance);
  for (int t = 0; t < a.num_draws; ++t)
    for (int j = 0; j < a.num_aes; ++j)
      if (a.delta_at(t, j) == 0) REQUIRE(a.beta_at(t, j) == 0.0);

  const auto c = run_chain(sim.cells, corr, Hyperparams{}, sched, 8);
  CHECK(a.beta != c.beta);
}

TEST_CASE("stored logOR is the product delta * sigma * b") {
  const auto sim = generate_sim1(Sim1Design{}, 4);
  const auto corr = correlation_from_graph(sim.graph, Epsilon::finite(1.0));
  GibbsSampler g(sim.cells, corr, Hyperparams{}, 5);
  g.initialize();
  for (int it = 0; it < 30; ++it) {
    g.sweep();
    const auto& s = g.state();
    const auto lor = s.log_odds_ratios();
    for (int j = 0; j < g.num_aes(); ++j)
      REQUIRE(lor(j) == s.delta(j) * s.sigma_beta(j) * s.beta_ss(j));
  }
}

TEST_CASE("posterior means track the truth on a small Sim-I run") {
  const auto sim = generate_sim1(Sim1Design{}, 5);
  const auto corr = correlation_from_graph(sim.graph, Epsilon::finite(0.1));
  const auto d = run_chain(sim.cells, corr, Hyperparams{}, Schedule{2000, 1000, 2}, 9);
  std::vector<double> mean(d.num_aes, 0.0);
  for (int t = 0; t < d.num_draws; ++t)
    for (int j = 0; j < d.num_aes; ++j) mean[j] += d.beta_at(t, j) / d.num_draws;
  double mx = 0, my = 0, sxy = 0, sxx = 0, syy = 0;
  const int n = d.num_aes;
  for (int j = 0; j < n; ++j) {
    mx += sim.true_beta[j] / n;
    my += mean[j] / n;
  }
  for (int j = 0; j < n; ++j) {
    sxy += (sim.true_beta[j] - mx) * (mean[j] - my);
    sxx += std::pow(sim.true_beta[j] - mx, 2);
    syy += std::pow(mean[j] - my, 2);
  }
  CHECK(sxy / std::sqrt(sxx * syy) > 0.8);
}

TEST_CASE("invalid hyperparameters and schedules are rejected") {
  Hyperparams h;
  h.pi = {1.0};
  CHECK_THROWS(h.validate(3));
  h.pi = {0.5, 0.5};
  CHECK_THROWS(h.validate(3));
  h.pi = {0.5};
  h.k = 0.0;
  CHECK_THROWS(h.validate(3));
  CHECK_THROWS(Schedule{100, 200, 1}.validate());
  CHECK_THROWS(Schedule{100, 10, 0}.validate());
}
