#pragma once

// End-to-end commands: fit, validate and simulate.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bgrass/engine.hpp"
#include "bgrass/posterior.hpp"
#include "bgrass/select.hpp"
#include "bgrass/simgen.hpp"

namespace bgrass {

struct RunConfig {
  std::string reports_path;
  std::string ontology_path;
  std::string negative_controls_path;
  char ontology_delimiter = ',';
  ReportSchema schema;
  FilterOptions filters;
  Hyperparams hyper;
  // Fixed epsilon, or a grid searched by DIC.
  std::optional<Epsilon> fixed_epsilon;
  std::vector<Epsilon> epsilon_grid = default_epsilon_grid();
  Schedule schedule{20000, 10000, 10};
  int chains = 3;
  std::uint64_t seed = 20220201;
  double fdr_alpha = 0.01;
  double effect_threshold = kLog2;
  EnrichmentOptions enrichment;
  double rhat_threshold = 1.1;
  int pg_exact_max_b = pg::kDefaultExactMaxB;
  std::string output_dir = "bgrass_run";
  int threads = 0;  // 0 = available parallelism

  std::vector<std::uint64_t> chain_seeds() const;
  int resolved_threads() const;
};

// Relative input paths resolve against base_dir. Throws ConfigError on malformed config.
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const std::string& json_text, const std::string& base_dir = ".");
// Canonical JSON echo of every setting (used in the manifest).
std::string config_to_json(const RunConfig& config);

struct FitOptions {
  bool allow_nonconverged = false;
  // Progress lines (chain, iteration, total) go here; null disables.
  std::ostream* progress = nullptr;
};

struct FitResult {
  std::string run_dir;
  std::string model;  // "BGrass" or "Bss"
  Epsilon epsilon = Epsilon::infinite();
  double max_rhat = 1.0;
  bool converged = true;
  int exit_code = 0;
  PosteriorSummary summary;
  std::vector<std::string> warnings;
};

// Writes summary.csv, enrichment.csv, grid.csv, diagnostics.json, draws.bin and
// manifest.json into config.output_dir. exit_code is 2 when max R_c >= threshold
// and allow_nonconverged is false.
FitResult cmd_fit(const RunConfig& config, const FitOptions& options = {});

struct ValidateReport {
  std::size_t reports_parsed = 0;
  std::size_t malformed_rows = 0;
  StratifySummary stratify;
  int num_aes = 0;
  int num_strata = 0;
  int num_predictors = 0;
  std::size_t num_edges = 0;
  std::size_t num_groups = 0;
  int isolated_aes = 0;
  // (epsilon, condition number of L + eps I) per grid value.
  std::vector<std::pair<Epsilon, double>> conditioning;
  std::vector<std::string> warnings;
};

// Dry run: parse, aggregate, build the graph and report conditioning. Throws ConfigError.
ValidateReport cmd_validate(const RunConfig& config);
void print_validate_report(std::ostream& out, const ValidateReport& report);

struct SimulateOptions {
  std::string design = "sim1";  // "sim1" or "sim2"
  int replicates = 1;
  std::uint64_t seed = 1;
  Sim1Design sim1;
  Sim2Design sim2;
  int sim2_num_aes = 60;
  int sim2_num_groups = 12;
  std::uint64_t sim2_graph_seed = 7;
  Hyperparams hyper;
  Schedule schedule{20000, 10000, 2};
  int chains = 3;
  std::vector<Epsilon> epsilon_grid = default_epsilon_grid();
  // When set, BGrass is fitted at this epsilon instead of the DIC choice.
  std::optional<Epsilon> bgrass_epsilon;
  double fdr_alpha = 0.05;
  int threads = 0;
  std::string output_dir;  // empty: no files written
  // Also write each replicate's reports.csv, ontology.csv and truth.csv under output_dir/replicate_NNN.
  bool export_data = false;
};

struct ReplicateModelResult {
  int replicate = 0;
  std::string model;
  Epsilon epsilon = Epsilon::infinite();
  double dic = 0.0;
  SimMetrics metrics;
  double max_rhat = 1.0;
  int num_selected = 0;
  int false_discoveries = 0;
  double realized_fdr = 0.0;
  std::vector<std::string> terms;
  std::vector<double> truth;
  std::vector<double> estimate;
};

struct SimulationResult {
  std::vector<ReplicateModelResult> rows;
  // Per-term MMSE across replicates for each model; groups from the generating ontology.
  std::vector<std::string> mmse_terms;
  std::vector<std::string> mmse_groups;
  std::vector<double> mmse_bgrass;
  std::vector<double> mmse_bss;
};

SimulationResult cmd_simulate(const SimulateOptions& options);
void write_simulation_outputs(const std::string& dir, const SimulationResult& result);

}  // namespace bgrass
