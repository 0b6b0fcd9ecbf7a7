#include "bgrass/select.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "bgrass/parallel.hpp"

namespace bgrass {

Eigen::MatrixXd posterior_mean_predictor(const DrawStore& draws, const StratifiedCells& cells) {
  const int num_aes = draws.num_aes();
  const int p = draws.num_predictors();
  Eigen::MatrixXd alpha_mean = Eigen::MatrixXd::Zero(num_aes, p);
  Eigen::VectorXd beta_mean = Eigen::VectorXd::Zero(num_aes);
  double count = 0.0;
  for (const auto& chain : draws.chains) {
    for (int t = 0; t < chain.num_draws; ++t) {
      for (int j = 0; j < num_aes; ++j) {
        beta_mean(j) += chain.beta_at(t, j);
        for (int l = 0; l < p; ++l) alpha_mean(j, l) += chain.alpha_at(t, j, l);
      }
    }
    count += chain.num_draws;
  }
  alpha_mean /= count;
  beta_mean /= count;
  Eigen::MatrixXd psi = cells.design * alpha_mean.transpose();
  for (int s = 0; s < cells.num_strata(); ++s) psi.row(s) += cells.vaccine(s) * beta_mean.transpose();
  return psi;
}

DicResult dic(const DrawStore& draws, const StratifiedCells& cells) {
  if (draws.total_draws() == 0) throw std::invalid_argument("dic: draw store is empty");
  double sum = 0.0;
  for (const auto& chain : draws.chains)
    for (double d : chain.deviance) sum += d;
  DicResult out;
  out.dbar = sum / static_cast<double>(draws.total_draws());
  out.d_hat = binomial_deviance(cells, posterior_mean_predictor(draws, cells));
  out.pd = out.dbar - out.d_hat;
  out.dic = out.dbar + out.pd;
  return out;
}

std::optional<std::size_t> choose_epsilon(const std::vector<GridEntry>& entries) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.failed) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = entries[*best];
    if (e.dic.dic < b.dic.dic || (e.dic.dic == b.dic.dic && b.epsilon < e.epsilon)) best = i;
  }
  return best;
}

GridSearchResult grid_search(const StratifiedCells& cells, const OntologyGraph& graph, const Hyperparams& hyper,
                             const std::vector<Epsilon>& grid, const Schedule& schedule,
                             const std::vector<std::uint64_t>& seeds, int threads, SamplerOptions options) {
  if (grid.empty()) throw std::invalid_argument("grid_search: epsilon grid is empty");
  if (seeds.empty()) throw std::invalid_argument("grid_search: need at least one seed");
  GridSearchResult result;
  result.grid.entries.resize(grid.size());
  result.draws.resize(grid.size());
  std::vector<std::optional<CorrelationStructure>> corr(grid.size());
  const auto lap = laplacian_sparse(graph);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    result.grid.entries[g].epsilon = grid[g];
    try {
      corr[g] = correlation_from_precision(lap, grid[g]);
    } catch (const std::exception& e) {
      result.grid.entries[g].failed = true;
      result.grid.entries[g].error = e.what();
    }
  }
  // One task per (epsilon, chain) so a single thread pool covers both levels.
  const std::size_t num_chains = seeds.size();
  std::vector<std::vector<ChainDraws>> chains(grid.size(), std::vector<ChainDraws>(num_chains));
  std::vector<std::string> errors(grid.size() * num_chains);
  parallel_for(grid.size() * num_chains, threads, [&](std::size_t task) {
    const std::size_t g = task / num_chains;
    const std::size_t c = task % num_chains;
    if (!corr[g]) return;
    try {
      chains[g][c] = run_chain(cells, *corr[g], hyper, schedule, seeds[c], options, {}, static_cast<int>(c));
    } catch (const std::exception& e) {
      errors[task] = e.what();
    }
  });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto& entry = result.grid.entries[g];
    for (std::size_t c = 0; c < num_chains && !entry.failed; ++c) {
      if (!errors[g * num_chains + c].empty()) {
        entry.failed = true;
        entry.error = errors[g * num_chains + c];
      }
    }
    if (entry.failed) continue;
    auto& store = result.draws[g];
    store.chains = std::move(chains[g]);
    store.schedule = schedule;
    store.hyper = hyper;
    store.epsilon = grid[g];
    store.ae_vocabulary = cells.ae_vocabulary;
    try {
      entry.dic = dic(store, cells);
    } catch (const std::exception& e) {
      entry.failed = true;
      entry.error = e.what();
    }
  }
  const auto best = choose_epsilon(result.grid.entries);
  if (!best) throw std::runtime_error("grid_search: every epsilon failed (first error: " +
                                      result.grid.entries.front().error + ")");
  result.grid.chosen = *best;
  result.grid.entries[*best].chosen = true;
  return result;
}

void write_grid_csv(std::ostream& out, const EpsilonGrid& grid) {
  out << "epsilon,dbar,pd,dic,chosen,status\n";
  out << std::setprecision(10);
  for (const auto& e : grid.entries) {
    out << e.epsilon.to_string() << ',';
    if (e.failed) {
      out << ",,,0,failed\n";
      continue;
    }
    out << e.dic.dbar << ',' << e.dic.pd << ',' << e.dic.dic << ',' << (e.chosen ? 1 : 0) << ",ok\n";
  }
}

}  // namespace bgrass
