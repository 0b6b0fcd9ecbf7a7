#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bgrass/simgen.hpp"

using namespace bgrass;

TEST_CASE("Sim-I truth has the published group sizes") {
  const auto a = generate_sim1(Sim1Design{}, 1);
  CHECK(a.cells.num_aes() == 70);
  CHECK(std::count(a.true_beta.begin(), a.true_beta.end(), 1.0) == 30);
  CHECK(std::count(a.true_beta.begin(), a.true_beta.end(), -1.0) == 15);
  CHECK(std::count(a.true_beta.begin(), a.true_beta.end(), 0.0) == 25);
  CHECK(a.graph.groups.at("G1").size() == 30);
  CHECK(a.graph.groups.at("G2").size() == 15);

  const auto b = generate_sim1(Sim1Design{}, 2);
  auto sorted_truth = [](const SimDataset& d) {
    std::vector<std::pair<std::string, double>> t;
    for (std::size_t j = 0; j < d.true_beta.size(); ++j) t.emplace_back(d.cells.ae_vocabulary[j], d.true_beta[j]);
    std::sort(t.begin(), t.end());
    return t;
  };
  CHECK(sorted_truth(a) == sorted_truth(b));
  CHECK(a.cells.events.sum() != b.cells.events.sum());
}

TEST_CASE("Sim-I generator is deterministic by seed") {
  const auto a = generate_sim1(Sim1Design{}, 9);
  const auto b = generate_sim1(Sim1Design{}, 9);
  CHECK(a.cells.events == b.cells.events);
  CHECK(a.cells.ae_vocabulary == b.cells.ae_vocabulary);
}

TEST_CASE("crude logOR of a unit-effect AE over many reports") {
  Sim1Design d;
  d.num_reports = 100000;
  const auto sim = generate_sim1(d, 4);
  const auto& c = sim.cells;
  for (int j = 0; j < c.num_aes(); ++j) {
    if (sim.true_beta[j] != 1.0) continue;
    double y1 = 0, n1 = 0, y0 = 0, n0 = 0;
    for (int s = 0; s < c.num_strata(); ++s) {
      (c.vaccine(s) == 1 ? y1 : y0) += c.events(s, j);
      (c.vaccine(s) == 1 ? n1 : n0) += c.trials(s);
    }
    const double lor = std::log(y1 / (n1 - y1)) - std::log(y0 / (n0 - y0));
    CHECK(std::abs(lor - 1.0) < 0.1);
    break;
  }
}

TEST_CASE("Sim-II truth mechanisms") {
  const auto ont = synthetic_ontology(40, 6, 3);
  CHECK(ont.terms.size() == 40);
  Sim2Design d;
  d.signal_fraction = 0.0;
  const auto none = generate_sim2(ont, d, 1);
  for (double b : none.true_beta) CHECK(b == 0.0);
  d.signal_fraction = 1.0;
  const auto all = generate_sim2(ont, d, 1);
  CHECK(std::count(all.true_beta.begin(), all.true_beta.end(), 0.0) == 0);
  CHECK(all.cells.covariate_names == std::vector<std::string>{"gender", "age"});
}

TEST_CASE("Sim-II effect correlation across connected pairs") {
  const auto ont = synthetic_ontology(30, 3, 5);
  const auto graph = build_graph(ont.mapping, ont.terms);
  std::vector<std::pair<int, int>> edges;
  for (int j = 0; j < graph.num_vertices; ++j)
    for (int k : graph.adjacency[j])
      if (j < k) edges.emplace_back(j, k);
  REQUIRE(!edges.empty());

  // Average correlation over connected pairs of beta across replicates, keyed by term.
  auto pair_corr = [&](Epsilon eps) {
    Sim2Design d;
    d.num_reports = 300;
    d.signal_fraction = 1.0;
    d.eps_true = eps;
    const int reps = 200;
    std::vector<std::vector<double>> by_term(ont.terms.size());
    for (int r = 0; r < reps; ++r) {
      const auto ds = generate_sim2(ont, d, 100 + r);
      std::vector<double> beta(ont.terms.size(), std::nan(""));
      for (std::size_t j = 0; j < ds.true_beta.size(); ++j) {
        const auto it = std::find(ont.terms.begin(), ont.terms.end(), ds.cells.ae_vocabulary[j]);
        beta[it - ont.terms.begin()] = ds.true_beta[j];
      }
      for (std::size_t j = 0; j < beta.size(); ++j) by_term[j].push_back(beta[j]);
    }
    double total = 0.0;
    int count = 0;
    for (auto [a, b] : edges) {
      double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
      int n = 0;
      for (int r = 0; r < reps; ++r) {
        const double x = by_term[a][r], y = by_term[b][r];
        if (std::isnan(x) || std::isnan(y)) continue;
        sa += x, sb += y, sab += x * y, saa += x * x, sbb += y * y;
        ++n;
      }
      const double cov = sab / n - sa / n * sb / n;
      total += cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
      ++count;
    }
    return total / count;
  };
  CHECK(std::abs(pair_corr(Epsilon::infinite())) < 0.05);
  CHECK(pair_corr(Epsilon::finite(0.01)) > 0.3);
}

TEST_CASE("evaluation metrics") {
  const std::vector<double> truth{1.0, 0.0, -1.0};
  CHECK(metrics(truth, truth, std::vector<double>{0.9, 0.5, 0.1}).rsse == 0.0);
  const std::vector<double> scores{0.9, 0.8, 0.3};
  const std::vector<int> labels{1, 0, 1};
  CHECK(*auc(scores, labels) == 0.5);
  const std::vector<double> as_scores{1.0, 0.0, 1.0};
  CHECK(*auc(as_scores, labels) == 1.0);
  CHECK_FALSE(auc(scores, std::vector<int>{1, 1, 1}).has_value());
  const std::vector<double> tied{0.5, 0.5};
  CHECK(*auc(tied, std::vector<int>{1, 0}) == 0.5);
  const auto m = metrics(truth, std::vector<double>{0.0, 0.0, 0.0}, std::vector<double>{0.9, 0.5, 0.1});
  CHECK(m.rsse == doctest::Approx(std::sqrt(2.0)));
  CHECK(m.squared_errors == std::vector<double>{1.0, 0.0, 1.0});
  CHECK(*m.auc == 1.0);
}
