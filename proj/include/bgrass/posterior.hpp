#pragma once

// Posterior summaries, Bayesian FDR selection, negative-control adjustment,
// group enrichment and convergence diagnostics.

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bgrass/engine.hpp"

namespace bgrass {

inline const double kLog2 = std::log(2.0);

struct AeSummary {
  std::string term;
  double mean = 0.0;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double selection_prob = 0.0;  // posterior mean of delta
  double prob_positive = 0.0;   // P(beta > 0)
  std::optional<double> nc_prob;
  bool fdr_signal = false;
  bool nc_signal = false;
};

struct GroupEnrichment {
  std::string group;
  int size = 0;
  double probability = 0.0;  // P(gamma_G > log 2)
  bool flagged = false;
};

struct RhatResult {
  std::vector<double> rhat;
  std::vector<bool> degenerate;
  double max_rhat = 1.0;
};

struct PosteriorSummary {
  std::vector<AeSummary> aes;
  std::vector<GroupEnrichment> groups;
  RhatResult diagnostics;
};

// Type-7 (linear interpolation) empirical quantile of unsorted data.
double quantile(std::vector<double> values, double prob);

// Pools every chain. Throws std::invalid_argument with fewer than 2 draws.
PosteriorSummary summarize(const DrawStore& draws);

// Gelman-Rubin potential scale reduction (whole chains) for one scalar parameter, floored at 1.
// Requires >= 2 chains of equal length >= 4.
struct Rhat {
  double value = 1.0;
  bool degenerate = false;
};
Rhat gelman_rubin(const std::vector<std::vector<double>>& chains);

// R_c for every AE's logOR.
RhatResult gelman_rubin_beta(const DrawStore& draws);

struct FdrSelection {
  std::vector<int> selected;  // indices, in descending probability order
  int num_passing = 0;        // m before the effect filter
  double cutoff = 1.0;        // smallest probability admitted (1 when m = 0)
};

// Largest m with mean_{i<=m}(1 - p_(i)) <= alpha; effects (if given) must exceed threshold.
FdrSelection fdr_select(std::span<const double> probs, double alpha, std::span<const double> effects = {},
                        double effect_threshold = kLog2);

// NCprob_j = fraction of draws with beta_j > mean_nc + 2 sd_nc (per-draw NC statistics).
// Throws std::invalid_argument with fewer than two control indices.
std::vector<double> nc_adjust(const DrawStore& draws, const std::vector<int>& nc_indices);

// Log odds ratio of a 2x2 table with 0.5 added to every cell.
double corrected_log_odds_ratio(double in_signal, double in_unsignal, double out_signal, double out_unsignal);

// gamma_G for one draw given per-AE signal indicators.
double enrichment_log_odds(const std::vector<int>& members, const std::vector<std::uint8_t>& signaled);

struct EnrichmentOptions {
  int min_group_size = 20;
  double fdr_alpha = 0.01;
};

// Per-group P(gamma_G > log 2) for groups with size > min_group_size; groups spanning the
// whole vocabulary are skipped (warnings appended). Flags from fdr_select on the probabilities.
std::vector<GroupEnrichment> enrichment(const DrawStore& draws, const std::map<std::string, std::vector<int>>& groups,
                                        const EnrichmentOptions& options = {},
                                        std::vector<std::string>* warnings = nullptr);

struct SignalOptions {
  double fdr_alpha = 0.01;
  double effect_threshold = kLog2;
};

// Fills fdr_signal (selection probabilities + effect filter) and nc_signal (NCprob + effect filter).
void flag_signals(PosteriorSummary& summary, const SignalOptions& options);

// summary.csv: one row per AE, logOR [95% CI] layout plus numeric columns.
void write_summary_csv(std::ostream& out, const PosteriorSummary& summary);
void write_enrichment_csv(std::ostream& out, const std::vector<GroupEnrichment>& groups);

}  // namespace bgrass
