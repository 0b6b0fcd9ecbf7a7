#include "bgrass/engine.hpp"

#include <cmath>
#include <sstream>

#include "bgrass/parallel.hpp"

namespace bgrass {
namespace {

constexpr double kJitter = 1e-10;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double log_choose(int n, int y) {
  return std::lgamma(n + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n - y + 1.0);
}

}  // namespace

void Hyperparams::validate(int num_aes) const {
  if (!(a_alpha > 0.0) || !(b_alpha > 0.0) || !(k > 0.0))
    throw std::invalid_argument("hyperparameters a_alpha, b_alpha and k must be positive");
  if (pi.empty() || (pi.size() != 1 && static_cast<int>(pi.size()) != num_aes))
    throw std::invalid_argument("pi must have one entry or one per AE");
  for (double p : pi)
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("pi entries must lie in (0, 1)");
}

void Schedule::validate() const {
  if (iterations < 0 || burn_in < 0 || thin < 1 || burn_in > iterations)
    throw std::invalid_argument("schedule requires 0 <= burn_in <= iterations and thin >= 1");
}

Eigen::VectorXd ChainState::log_odds_ratios() const {
  return (delta.cast<double>().array() * sigma_beta.array() * beta_ss.array()).matrix();
}

std::size_t DrawStore::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += static_cast<std::size_t>(c.num_draws);
  return n;
}

GibbsSampler::GibbsSampler(const StratifiedCells& cells, const CorrelationStructure& corr, Hyperparams hyper,
                           std::uint64_t seed, SamplerOptions options)
    : design_(cells.design),
      vaccine_(cells.vaccine),
      trials_(cells.trials),
      events_(cells.events),
      corr_(corr),
      hyper_(std::move(hyper)),
      options_(options),
      rng_(seed),
      num_aes_(cells.num_aes()),
      num_strata_(cells.num_strata()),
      num_predictors_(cells.num_predictors()) {
  hyper_.validate(num_aes_);
  if (corr_.dimension() != num_aes_)
    throw std::invalid_argument("correlation structure dimension does not match the number of AEs");
  refresh_kappa();
  if (!corr_.epsilon.is_infinite()) {
    beta_precision_ = corr_.precision;
    beta_precision_.makeCompressed();
    beta_precision_diag_.assign(num_aes_, nullptr);
    for (int j = 0; j < num_aes_; ++j) beta_precision_diag_[j] = &beta_precision_.coeffRef(j, j);
    beta_solver_.analyzePattern(beta_precision_);
  }
  initialize();
}

void GibbsSampler::refresh_kappa() {
  kappa_.resize(num_strata_, num_aes_);
  log_binom_const_ = 0.0;
  for (int j = 0; j < num_aes_; ++j)
    for (int s = 0; s < num_strata_; ++s) {
      kappa_(s, j) = events_(s, j) - 0.5 * trials_(s);
      log_binom_const_ += log_choose(trials_(s), events_(s, j));
    }
}

void GibbsSampler::set_events(const Eigen::MatrixXi& events) {
  if (events.rows() != num_strata_ || events.cols() != num_aes_)
    throw std::invalid_argument("set_events: shape mismatch");
  events_ = events;
  refresh_kappa();
}

Eigen::VectorXd GibbsSampler::draw_gaussian_prior() {
  Eigen::VectorXd z(num_aes_);
  for (int j = 0; j < num_aes_; ++j) z(j) = rng_.normal();
  if (corr_.epsilon.is_infinite()) return z;
  const auto& factor = *corr_.precision_factor;
  const Eigen::VectorXd w = factor.matrixU().solve(z);
  return factor.permutationPinv() * w;
}

void GibbsSampler::initialize() {
  state_.alpha = Eigen::MatrixXd::Zero(num_aes_, num_predictors_);
  state_.beta_ss = draw_gaussian_prior();
  state_.sigma_beta = Eigen::VectorXd::Ones(num_aes_);
  state_.delta.resize(num_aes_);
  for (int j = 0; j < num_aes_; ++j) state_.delta(j) = rng_.bernoulli(hyper_.prior_inclusion(j)) ? 1 : 0;
  state_.tau2 = Eigen::VectorXd::Ones(num_aes_);
  state_.sigma_alpha2 = Eigen::VectorXd::Ones(num_predictors_);
  state_.omega.resize(num_strata_, num_aes_);
  for (int s = 0; s < num_strata_; ++s) state_.omega.row(s).setConstant(0.25 * trials_(s));
  state_.iteration = 0;
  base_ = Eigen::MatrixXd::Zero(num_strata_, num_aes_);
}

void GibbsSampler::set_state(const ChainState& state) {
  if (state.alpha.rows() != num_aes_ || state.alpha.cols() != num_predictors_ || state.beta_ss.size() != num_aes_ ||
      state.omega.rows() != num_strata_ || state.omega.cols() != num_aes_ ||
      state.sigma_alpha2.size() != num_predictors_)
    throw std::invalid_argument("set_state: shape mismatch");
  state_ = state;
  base_.resize(num_strata_, num_aes_);
  for (int j = 0; j < num_aes_; ++j) refresh_base(j);
}

void GibbsSampler::refresh_base(int j) { base_.col(j).noalias() = design_ * state_.alpha.row(j).transpose(); }

double GibbsSampler::linear_predictor(int s, int j) const { return base_(s, j) + vaccine_(s) * effect(j); }

void GibbsSampler::vaccine_moments(int j, double& quad, double& lin) const {
  quad = 0.0;
  lin = 0.0;
  for (int s = 0; s < num_strata_; ++s) {
    const double v = vaccine_(s);
    if (v == 0.0) continue;
    quad += state_.omega(s, j) * v * v;
    lin += v * (kappa_(s, j) - state_.omega(s, j) * base_(s, j));
  }
}

void GibbsSampler::update_omega() {
  for (int j = 0; j < num_aes_; ++j) {
    const double e = effect(j);
    for (int s = 0; s < num_strata_; ++s) {
      const double psi = base_(s, j) + vaccine_(s) * e;
      if (!std::isfinite(psi)) {
        std::ostringstream msg;
        msg << "non-finite linear predictor at iteration " << state_.iteration << " (stratum " << s << ", AE " << j
            << ", alpha = " << state_.alpha.row(j) << ", delta = " << state_.delta(j)
            << ", sigma = " << state_.sigma_beta(j) << ", b = " << state_.beta_ss(j) << ")";
        throw SamplerError(msg.str());
      }
      state_.omega(s, j) = pg::sample_pg(trials_(s), std::fabs(psi), rng_, options_.pg_exact_max_b);
    }
  }
}

void GibbsSampler::update_alpha(int j) {
  const int p = num_predictors_;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(p);
  const double e = effect(j);
  for (int s = 0; s < num_strata_; ++s) {
    const double w = state_.omega(s, j);
    const auto x = design_.row(s);
    q.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), w);
    r.noalias() += x.transpose() * (kappa_(s, j) - w * vaccine_(s) * e);
  }
  q.diagonal() += state_.sigma_alpha2.cwiseInverse();
  Eigen::LLT<Eigen::MatrixXd> llt(q.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) {
    q.diagonal().array() += kJitter;
    llt.compute(q.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success)
      throw SamplerError("alpha precision factorization failed for AE " + std::to_string(j));
  }
  Eigen::VectorXd z(p);
  for (int l = 0; l < p; ++l) z(l) = rng_.normal();
  Eigen::VectorXd draw = llt.solve(r);
  draw.noalias() += llt.matrixU().solve(z);
  state_.alpha.row(j) = draw.transpose();
  refresh_base(j);
}

void GibbsSampler::update_beta_ss() {
  Eigen::VectorXd diag_add(num_aes_);
  Eigen::VectorXd rhs(num_aes_);
  for (int j = 0; j < num_aes_; ++j) {
    double quad = 0.0, lin = 0.0;
    vaccine_moments(j, quad, lin);
    const double c = state_.delta(j) * state_.sigma_beta(j);
    diag_add(j) = c * c * quad;
    rhs(j) = c * lin;
  }
  if (corr_.epsilon.is_infinite()) {
    for (int j = 0; j < num_aes_; ++j) {
      const double prec = 1.0 + diag_add(j);
      state_.beta_ss(j) = rhs(j) / prec + rng_.normal() / std::sqrt(prec);
    }
    return;
  }
  const auto& base_prec = corr_.precision;
  auto factorize = [&](double jitter) {
    for (int j = 0; j < num_aes_; ++j) *beta_precision_diag_[j] = base_prec.coeff(j, j) + diag_add(j) + jitter;
    beta_solver_.factorize(beta_precision_);
    return beta_solver_.info() == Eigen::Success;
  };
  if (!factorize(0.0) && !factorize(kJitter)) {
    std::ostringstream msg;
    msg << "posterior precision factorization for b failed at iteration " << state_.iteration
        << " (max diagonal addition " << diag_add.maxCoeff() << ")";
    throw SamplerError(msg.str());
  }
  Eigen::VectorXd z(num_aes_);
  for (int j = 0; j < num_aes_; ++j) z(j) = rng_.normal();
  const Eigen::VectorXd mean = beta_solver_.solve(rhs);
  const Eigen::VectorXd w = beta_solver_.matrixU().solve(z);
  state_.beta_ss = mean + beta_solver_.permutationPinv() * w;
}

void GibbsSampler::update_sigma_beta(int j) {
  double quad = 0.0, lin = 0.0;
  vaccine_moments(j, quad, lin);
  const double b = state_.beta_ss(j);
  const double d = state_.delta(j);
  const double prec = 1.0 / state_.tau2(j) + d * b * b * quad;
  const double loc = d * b * lin / prec;
  state_.sigma_beta(j) = truncated_normal_lower(rng_, loc, 1.0 / std::sqrt(prec), 0.0);
}

void GibbsSampler::update_delta(int j) {
  double quad = 0.0, lin = 0.0;
  vaccine_moments(j, quad, lin);
  const double c = state_.sigma_beta(j) * state_.beta_ss(j);
  const double pi = hyper_.prior_inclusion(j);
  // log p(delta = 1) - log p(delta = 0); the logistic below is the normalized two-point posterior.
  const double logit = std::log(pi) - std::log1p(-pi) + c * lin - 0.5 * c * c * quad;
  const double prob = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  state_.delta(j) = rng_.uniform() < prob ? 1 : 0;
}

void GibbsSampler::update_variances() {
  for (int l = 0; l < num_predictors_; ++l) {
    const double ss = state_.alpha.col(l).squaredNorm();
    const double precision = rng_.gamma(hyper_.a_alpha + 0.5 * num_aes_, hyper_.b_alpha + 0.5 * ss);
    state_.sigma_alpha2(l) = 1.0 / precision;
  }
  for (int j = 0; j < num_aes_; ++j) {
    const double s = state_.sigma_beta(j);
    const double precision = rng_.gamma(0.5 * (hyper_.k + 1.0), 0.5 * (hyper_.k + s * s));
    state_.tau2(j) = 1.0 / precision;
  }
}

void GibbsSampler::sweep() {
  update_omega();
  for (int j = 0; j < num_aes_; ++j) update_alpha(j);
  update_beta_ss();
  for (int j = 0; j < num_aes_; ++j) update_sigma_beta(j);
  for (int j = 0; j < num_aes_; ++j) update_delta(j);
  update_variances();
  ++state_.iteration;
}

double GibbsSampler::deviance() const {
  double loglik = log_binom_const_;
  for (int j = 0; j < num_aes_; ++j) {
    const double e = effect(j);
    for (int s = 0; s < num_strata_; ++s) {
      const double psi = base_(s, j) + vaccine_(s) * e;
      loglik += events_(s, j) * psi - trials_(s) * softplus(psi);
    }
  }
  return -2.0 * loglik;
}

double binomial_deviance(const StratifiedCells& cells, const Eigen::MatrixXd& psi) {
  double loglik = 0.0;
  for (int j = 0; j < cells.num_aes(); ++j)
    for (int s = 0; s < cells.num_strata(); ++s) {
      const int n = cells.trials(s);
      const int y = cells.events(s, j);
      loglik += log_choose(n, y) + y * psi(s, j) - n * softplus(psi(s, j));
    }
  return -2.0 * loglik;
}

ChainDraws run_chain(const StratifiedCells& cells, const CorrelationStructure& corr, const Hyperparams& hyper,
                     const Schedule& schedule, std::uint64_t seed, SamplerOptions options,
                     const ProgressCallback& progress, int chain_index) {
  schedule.validate();
  GibbsSampler sampler(cells, corr, hyper, seed, options);
  ChainDraws out;
  out.num_aes = cells.num_aes();
  out.num_predictors = cells.num_predictors();
  out.seed = seed;
  const int stored = schedule.num_stored();
  out.beta.reserve(static_cast<std::size_t>(stored) * out.num_aes);
  out.delta.reserve(static_cast<std::size_t>(stored) * out.num_aes);
  out.alpha.reserve(static_cast<std::size_t>(stored) * out.num_aes * out.num_predictors);
  out.deviance.reserve(stored);
  const long report_every = std::max(1, schedule.iterations / 20);
  for (int it = 1; it <= schedule.iterations; ++it) {
    sampler.sweep();
    if (progress && (it % report_every == 0 || it == schedule.iterations))
      progress(chain_index, it, schedule.iterations);
    if (it <= schedule.burn_in || (it - schedule.burn_in) % schedule.thin != 0 || out.num_draws == stored) continue;
    const auto& st = sampler.state();
    const double dev = sampler.deviance();
    if (!std::isfinite(dev)) {
      std::ostringstream msg;
      msg << "non-finite deviance at iteration " << it << " (seed " << seed << "); sigma_alpha2 = "
          << st.sigma_alpha2.transpose();
      throw SamplerError(msg.str());
    }
    const Eigen::VectorXd beta = st.log_odds_ratios();
    for (int j = 0; j < out.num_aes; ++j) {
      out.beta.push_back(beta(j));
      out.delta.push_back(static_cast<std::uint8_t>(st.delta(j)));
      for (int l = 0; l < out.num_predictors; ++l) out.alpha.push_back(st.alpha(j, l));
    }
    out.deviance.push_back(dev);
    ++out.num_draws;
  }
  return out;
}

DrawStore run_chains(const StratifiedCells& cells, const CorrelationStructure& corr, const Hyperparams& hyper,
                     const Schedule& schedule, const std::vector<std::uint64_t>& seeds, int threads,
                     SamplerOptions options, const ProgressCallback& progress) {
  DrawStore store;
  store.schedule = schedule;
  store.hyper = hyper;
  store.epsilon = corr.epsilon;
  store.ae_vocabulary = cells.ae_vocabulary;
  store.chains.resize(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t c) {
    store.chains[c] = run_chain(cells, corr, hyper, schedule, seeds[c], options, progress, static_cast<int>(c));
  });
  return store;
}

}  // namespace bgrass
