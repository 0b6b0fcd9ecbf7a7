#pragma once

// Synthetic data for the two simulation designs and their evaluation metrics.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bgrass/ingest.hpp"
#include "bgrass/ontology.hpp"

namespace bgrass {

struct SimDataset {
  ReportSchema schema;
  std::vector<ReportRecord> reports;
  OntologyMapping ontology;
  // Aggregated through filter_and_stratify; AE order is the cells' vocabulary order.
  StratifiedCells cells;
  OntologyGraph graph;
  // True logORs aligned with cells.ae_vocabulary.
  std::vector<double> true_beta;
};

// Two groups of equal-effect AEs (30 at logOR 1, 15 at logOR -1) and 25 isolated null AEs.
struct Sim1Design {
  int num_reports = 5000;
  int group1_size = 30;
  int group2_size = 15;
  int num_isolated = 25;
  double group1_effect = 1.0;
  double group2_effect = -1.0;
  // Baseline log-odds of every AE for control-vaccine reports.
  double intercept = -3.0;
};

SimDataset generate_sim1(const Sim1Design& design, std::uint64_t seed);

// Correlated-effect design: beta* ~ N(0, v Omega_eps_true), delta ~ Bern(signal_fraction),
// with gender and four age groups as covariates.
struct Sim2Design {
  int num_reports = 5000;
  double signal_fraction = 0.5;
  Epsilon eps_true = Epsilon::infinite();
  double effect_variance = 0.1;
  double vaccine_prob = 0.5;
  double female_prob = 0.71;
  // Age-group shares for [18,30), [30,50), [50,65), >=65.
  std::vector<double> age_probs{0.126, 0.346, 0.271, 0.258};
  double intercept_mean = -3.0;
  double intercept_sd = 0.5;
  double male_effect_mean = -0.3;
  double male_effect_sd = 0.2;
  double age_effect_sd = 0.3;
};

// Random grouped vocabulary "AE001".. with terms assigned to one of num_groups groups, some
// to a second group, and a fraction left isolated.
struct SyntheticOntology {
  std::vector<std::string> terms;
  OntologyMapping mapping;
};
SyntheticOntology synthetic_ontology(int num_aes, int num_groups, std::uint64_t seed, double isolated_fraction = 0.1,
                                     double second_group_prob = 0.15);

// Throws std::invalid_argument for a non-positive finite eps_true (enforced by Epsilon).
SimDataset generate_sim2(const SyntheticOntology& ontology, const Sim2Design& design, std::uint64_t seed);

struct SimMetrics {
  double rsse = 0.0;
  std::optional<double> auc;  // missing when all labels share one class
  std::vector<double> squared_errors;
};

// Rank (Mann-Whitney) AUC of scores against binary labels; ties count one half.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

// RSSE of estimates vs truth and AUC of P(beta > 0) against the label beta > 0.
SimMetrics metrics(std::span<const double> truth, std::span<const double> estimates,
                   std::span<const double> prob_positive);

}  // namespace bgrass
