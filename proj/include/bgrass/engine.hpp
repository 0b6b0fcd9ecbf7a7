#pragma once

// Gibbs sampler for the graph-regularized spike-and-slab logistic model.
//
// Linear predictor per stratum s and AE j:
//   psi_sj = alpha_j . X_s + V_s * delta_j * sigma_j * b_j
// with b ~ N(0, Omega_eps), sigma_j ~ FN(0, tau_j^2), tau_j^-2 ~ Gamma(k/2, k/2),
// delta_j ~ Bern(pi_j), alpha_jl ~ N(0, sigma_alpha_l^2), sigma_alpha_l^-2 ~ Gamma(a, b).
// Binomial cells are augmented with omega_sj ~ PG(n_s, psi_sj), kappa_sj = y_sj - n_s / 2.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bgrass/ingest.hpp"
#include "bgrass/ontology.hpp"
#include "bgrass/pg.hpp"
#include "bgrass/random.hpp"

namespace bgrass {

struct Hyperparams {
  double a_alpha = 0.5;
  double b_alpha = 0.5;
  double k = 1.0;
  // One entry (shared) or one per AE.
  std::vector<double> pi{0.5};

  double prior_inclusion(int j) const { return pi.size() == 1 ? pi[0] : pi[static_cast<std::size_t>(j)]; }
  // Throws std::invalid_argument on out-of-range values or a size mismatch with num_aes.
  void validate(int num_aes) const;
};

struct Schedule {
  int iterations = 20000;
  int burn_in = 10000;
  int thin = 2;

  int num_stored() const { return iterations > burn_in ? (iterations - burn_in) / thin : 0; }
  void validate() const;
};

struct SamplerOptions {
  int pg_exact_max_b = pg::kDefaultExactMaxB;
};

struct ChainState {
  Eigen::MatrixXd alpha;         // J x (p + 1)
  Eigen::VectorXd beta_ss;       // J, standardized effect b
  Eigen::VectorXd sigma_beta;    // J, >= 0
  Eigen::VectorXi delta;         // J, {0, 1}
  Eigen::VectorXd tau2;          // J
  Eigen::VectorXd sigma_alpha2;  // p + 1
  Eigen::MatrixXd omega;         // S x J
  long iteration = 0;

  // logOR beta_j = delta_j * sigma_j * b_j.
  Eigen::VectorXd log_odds_ratios() const;
};

// Thinned post-burn-in draws of one chain, stored draw-major.
struct ChainDraws {
  int num_aes = 0;
  int num_predictors = 0;
  int num_draws = 0;
  std::uint64_t seed = 0;
  std::vector<double> beta;        // num_draws x J
  std::vector<std::uint8_t> delta; // num_draws x J
  std::vector<double> alpha;       // num_draws x J x (p + 1)
  std::vector<double> deviance;    // num_draws

  double beta_at(int t, int j) const { return beta[static_cast<std::size_t>(t) * num_aes + j]; }
  int delta_at(int t, int j) const { return delta[static_cast<std::size_t>(t) * num_aes + j]; }
  double alpha_at(int t, int j, int l) const {
    return alpha[(static_cast<std::size_t>(t) * num_aes + j) * num_predictors + l];
  }
};

struct DrawStore {
  std::vector<ChainDraws> chains;
  Schedule schedule;
  Hyperparams hyper;
  Epsilon epsilon = Epsilon::infinite();
  std::vector<std::string> ae_vocabulary;

  int num_aes() const { return chains.empty() ? 0 : chains.front().num_aes; }
  int num_predictors() const { return chains.empty() ? 0 : chains.front().num_predictors; }
  std::size_t total_draws() const;
};

// Raised when psi or the deviance goes non-finite, or a factorization fails.
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GibbsSampler {
 public:
  GibbsSampler(const StratifiedCells& cells, const CorrelationStructure& corr, Hyperparams hyper,
               std::uint64_t seed, SamplerOptions options = {});

  // Prior-plausible start: alpha = 0, b ~ N(0, Omega), sigma = 1, delta ~ Bern(pi),
  // tau^2 = 1, sigma_alpha^2 = 1, omega = n_s / 4.
  void initialize();

  // One sweep in fixed order: omega, alpha, b, sigma, delta, variances.
  void sweep();

  void update_omega();
  void update_alpha(int j);
  void update_beta_ss();
  void update_sigma_beta(int j);
  void update_delta(int j);
  void update_variances();

  // -2 * sum of binomial log-likelihoods at the current linear predictor.
  double deviance() const;

  // Replace the event counts (same shape); used by joint-distribution tests.
  void set_events(const Eigen::MatrixXi& events);
  // Overwrite the whole state (shapes must match) and refresh caches.
  void set_state(const ChainState& state);

  const ChainState& state() const { return state_; }
  Rng& rng() { return rng_; }
  int num_aes() const { return num_aes_; }
  int num_strata() const { return num_strata_; }
  int num_predictors() const { return num_predictors_; }

  // Current psi_sj.
  double linear_predictor(int s, int j) const;

 private:
  void refresh_base(int j);
  void refresh_kappa();
  double effect(int j) const { return state_.delta(j) * state_.sigma_beta(j) * state_.beta_ss(j); }
  // sum_s w_sj V_s^2 and sum_s V_s (kappa_sj - w_sj base_sj).
  void vaccine_moments(int j, double& quad, double& lin) const;
  Eigen::VectorXd draw_gaussian_prior();

  Eigen::MatrixXd design_;
  Eigen::VectorXd vaccine_;
  Eigen::VectorXi trials_;
  Eigen::MatrixXi events_;
  Eigen::MatrixXd kappa_;  // S x J
  Eigen::MatrixXd base_;   // S x J, alpha_j . X_s
  double log_binom_const_ = 0.0;

  const CorrelationStructure& corr_;
  Hyperparams hyper_;
  SamplerOptions options_;
  Rng rng_;
  ChainState state_;
  int num_aes_ = 0;
  int num_strata_ = 0;
  int num_predictors_ = 0;

  // Posterior precision for b: corr_.precision plus a diagonal; pattern analyzed once.
  Eigen::SparseMatrix<double> beta_precision_;
  std::vector<double*> beta_precision_diag_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> beta_solver_;
};

using ProgressCallback = std::function<void(int chain, long iteration, long total)>;

// Runs one chain; throws SamplerError on non-finite values.
ChainDraws run_chain(const StratifiedCells& cells, const CorrelationStructure& corr, const Hyperparams& hyper,
                     const Schedule& schedule, std::uint64_t seed, SamplerOptions options = {},
                     const ProgressCallback& progress = {}, int chain_index = 0);

// Runs one chain per seed, up to `threads` concurrently; chain order follows seeds.
DrawStore run_chains(const StratifiedCells& cells, const CorrelationStructure& corr, const Hyperparams& hyper,
                     const Schedule& schedule, const std::vector<std::uint64_t>& seeds, int threads = 1,
                     SamplerOptions options = {}, const ProgressCallback& progress = {});

// Binomial deviance of a full S x J linear-predictor matrix.
double binomial_deviance(const StratifiedCells& cells, const Eigen::MatrixXd& psi);

}  // namespace bgrass
