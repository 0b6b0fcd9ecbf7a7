#include "bgrass/simgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

#include "bgrass/random.hpp"

namespace bgrass {
namespace {

std::string term_name(int j) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "AE%03d", j + 1);
  return buf;
}

std::string report_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "R%06d", i + 1);
  return buf;
}

double logistic(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Aggregate reports and align the generation-order truth with the cells' vocabulary.
void finish(SimDataset& ds, const std::vector<std::string>& terms, const std::vector<double>& beta) {
  FilterOptions filter;
  filter.min_ae_count = 0;
  ds.cells = filter_and_stratify(ds.reports, ds.schema, filter);
  ds.graph = build_graph(ds.ontology, ds.cells.ae_vocabulary);
  std::map<std::string, double> by_term;
  for (std::size_t j = 0; j < terms.size(); ++j) by_term[terms[j]] = beta[j];
  ds.true_beta.clear();
  for (const auto& t : ds.cells.ae_vocabulary) ds.true_beta.push_back(by_term.at(t));
}

}  // namespace

SimDataset generate_sim1(const Sim1Design& design, std::uint64_t seed) {
  if (design.num_reports < 2) throw std::invalid_argument("sim1: need at least two reports");
  Rng rng(seed);
  const int num_aes = design.group1_size + design.group2_size + design.num_isolated;
  std::vector<std::string> terms;
  std::vector<double> beta(num_aes, 0.0);
  SimDataset ds;
  for (int j = 0; j < num_aes; ++j) {
    terms.push_back(term_name(j));
    if (j < design.group1_size) {
      beta[j] = design.group1_effect;
      ds.ontology.pairs.emplace_back(terms.back(), "G1");
    } else if (j < design.group1_size + design.group2_size) {
      beta[j] = design.group2_effect;
      ds.ontology.pairs.emplace_back(terms.back(), "G2");
    }
  }
  const double p0 = logistic(design.intercept);
  std::vector<double> p1(num_aes);
  for (int j = 0; j < num_aes; ++j) p1[j] = logistic(design.intercept + beta[j]);
  ds.reports.reserve(design.num_reports);
  for (int i = 0; i < design.num_reports; ++i) {
    ReportRecord rec;
    rec.report_id = report_id(i);
    rec.vaccine = i % 2;
    rec.vaccine_code = std::to_string(rec.vaccine);
    for (int j = 0; j < num_aes; ++j)
      if (rng.uniform() < (rec.vaccine ? p1[j] : p0)) rec.ae_terms.push_back(terms[j]);
    ds.reports.push_back(std::move(rec));
  }
  finish(ds, terms, beta);
  return ds;
}

SyntheticOntology synthetic_ontology(int num_aes, int num_groups, std::uint64_t seed, double isolated_fraction,
                                     double second_group_prob) {
  if (num_aes < 1 || num_groups < 1) throw std::invalid_argument("synthetic_ontology: need AEs and groups");
  Rng rng(seed);
  SyntheticOntology out;
  auto group_name = [](int g) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "G%02d", g + 1);
    return std::string(buf);
  };
  for (int j = 0; j < num_aes; ++j) {
    out.terms.push_back(term_name(j));
    if (rng.uniform() < isolated_fraction) continue;
    const int g = static_cast<int>(rng.uniform() * num_groups);
    out.mapping.pairs.emplace_back(out.terms.back(), group_name(g));
    if (num_groups > 1 && rng.uniform() < second_group_prob) {
      int h = static_cast<int>(rng.uniform() * (num_groups - 1));
      if (h >= g) ++h;
      out.mapping.pairs.emplace_back(out.terms.back(), group_name(h));
    }
  }
  return out;
}

SimDataset generate_sim2(const SyntheticOntology& ontology, const Sim2Design& design, std::uint64_t seed) {
  if (design.signal_fraction < 0.0 || design.signal_fraction > 1.0)
    throw std::invalid_argument("sim2: signal_fraction must lie in [0, 1]");
  if (!(design.effect_variance > 0.0)) throw std::invalid_argument("sim2: effect variance must be positive");
  if (design.age_probs.size() != 4) throw std::invalid_argument("sim2: need four age-group shares");
  Rng rng(seed);
  const int num_aes = static_cast<int>(ontology.terms.size());
  const auto graph = build_graph(ontology.mapping, ontology.terms);
  const auto corr = correlation_from_graph(graph, design.eps_true);

  Eigen::VectorXd z(num_aes);
  for (int j = 0; j < num_aes; ++j) z(j) = rng.normal();
  Eigen::VectorXd effects = z;
  if (!design.eps_true.is_infinite()) {
    Eigen::LLT<Eigen::MatrixXd> llt(corr.omega);
    effects = llt.matrixL() * z;
  }
  effects *= std::sqrt(design.effect_variance);
  std::vector<double> beta(num_aes);
  for (int j = 0; j < num_aes; ++j) beta[j] = rng.uniform() < design.signal_fraction ? effects(j) : 0.0;

  // Covariate coefficients: intercept, male, and the three non-reference age groups.
  std::vector<std::array<double, 5>> alpha(num_aes);
  for (auto& a : alpha) {
    a[0] = design.intercept_mean + design.intercept_sd * rng.normal();
    a[1] = design.male_effect_mean + design.male_effect_sd * rng.normal();
    for (int l = 2; l < 5; ++l) a[l] = design.age_effect_sd * rng.normal();
  }

  SimDataset ds;
  ds.ontology = ontology.mapping;
  ds.schema.covariates = {{"gender", {}, std::nullopt}, {"age", {30.0, 50.0, 65.0}, std::nullopt}};
  static const double kAgeLow[4] = {18, 30, 50, 65};
  static const double kAgeHigh[4] = {30, 50, 65, 90};
  std::vector<double> age_cdf(4);
  std::partial_sum(design.age_probs.begin(), design.age_probs.end(), age_cdf.begin());
  ds.reports.reserve(design.num_reports);
  for (int i = 0; i < design.num_reports; ++i) {
    ReportRecord rec;
    rec.report_id = report_id(i);
    rec.vaccine = rng.uniform() < design.vaccine_prob ? 1 : 0;
    rec.vaccine_code = std::to_string(rec.vaccine);
    const bool male = rng.uniform() >= design.female_prob;
    const double u = rng.uniform() * age_cdf.back();
    const int age_group = std::min<int>(3, static_cast<int>(std::upper_bound(age_cdf.begin(), age_cdf.end(), u) -
                                                            age_cdf.begin()));
    const int age = static_cast<int>(kAgeLow[age_group] + rng.uniform() * (kAgeHigh[age_group] - kAgeLow[age_group]));
    rec.covariates = {male ? "M" : "F", std::to_string(age)};
    for (int j = 0; j < num_aes; ++j) {
      double psi = alpha[j][0] + (male ? alpha[j][1] : 0.0) + rec.vaccine * beta[j];
      if (age_group > 0) psi += alpha[j][1 + age_group];
      if (rng.uniform() < logistic(psi)) rec.ae_terms.push_back(ontology.terms[j]);
    }
    ds.reports.push_back(std::move(rec));
  }
  finish(ds, ontology.terms, beta);
  return ds;
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  double pairs = 0.0, wins = 0.0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (labels[a] != 1) continue;
    for (std::size_t b = 0; b < scores.size(); ++b) {
      if (labels[b] == 1) continue;
      pairs += 1.0;
      if (scores[a] > scores[b]) {
        wins += 1.0;
      } else if (scores[a] == scores[b]) {
        wins += 0.5;
      }
    }
  }
  if (pairs == 0.0) return std::nullopt;
  return wins / pairs;
}

SimMetrics metrics(std::span<const double> truth, std::span<const double> estimates,
                   std::span<const double> prob_positive) {
  if (truth.size() != estimates.size() || truth.size() != prob_positive.size())
    throw std::invalid_argument("metrics: dimension mismatch");
  SimMetrics out;
  double sse = 0.0;
  std::vector<int> labels;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const double e = (truth[j] - estimates[j]) * (truth[j] - estimates[j]);
    out.squared_errors.push_back(e);
    sse += e;
    labels.push_back(truth[j] > 0.0 ? 1 : 0);
  }
  out.rsse = std::sqrt(sse);
  out.auc = auc(prob_positive, labels);
  return out;
}

}  // namespace bgrass
