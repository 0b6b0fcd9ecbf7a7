#pragma once

// Deviance information criterion and the epsilon grid search.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bgrass/engine.hpp"

namespace bgrass {

struct DicResult {
  double dic = 0.0;
  double dbar = 0.0;   // mean stored deviance
  double d_hat = 0.0;  // deviance at the posterior-mean linear predictor
  double pd = 0.0;     // dbar - d_hat
};

// Posterior-mean linear predictor per cell: X_s . mean(alpha_j) + V_s mean(beta_j).
Eigen::MatrixXd posterior_mean_predictor(const DrawStore& draws, const StratifiedCells& cells);

// Throws std::invalid_argument on an empty store.
DicResult dic(const DrawStore& draws, const StratifiedCells& cells);

struct GridEntry {
  Epsilon epsilon = Epsilon::infinite();
  bool failed = false;
  std::string error;
  DicResult dic;
  bool chosen = false;
};

struct EpsilonGrid {
  std::vector<GridEntry> entries;
  std::size_t chosen = 0;

  const Epsilon& chosen_epsilon() const { return entries.at(chosen).epsilon; }
};

// Index of the minimum-DIC surviving entry; ties go to the larger epsilon.
std::optional<std::size_t> choose_epsilon(const std::vector<GridEntry>& entries);

struct GridSearchResult {
  EpsilonGrid grid;
  // Draws per grid entry (empty store for failed entries).
  std::vector<DrawStore> draws;
};

// Runs every chain for every grid value (parallel across epsilon and chains).
// Throws std::runtime_error when every entry fails.
GridSearchResult grid_search(const StratifiedCells& cells, const OntologyGraph& graph, const Hyperparams& hyper,
                             const std::vector<Epsilon>& grid, const Schedule& schedule,
                             const std::vector<std::uint64_t>& seeds, int threads = 1, SamplerOptions options = {});

void write_grid_csv(std::ostream& out, const EpsilonGrid& grid);

}  // namespace bgrass
