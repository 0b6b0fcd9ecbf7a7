#include "bgrass/posterior.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace bgrass {
namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

PosteriorSummary summarize(const DrawStore& draws) {
  const std::size_t total = draws.total_draws();
  if (total < 2) throw std::invalid_argument("summarize: need at least two pooled draws for intervals");
  const int num_aes = draws.num_aes();
  PosteriorSummary out;
  out.aes.resize(num_aes);
  std::vector<double> column(total);
  for (int j = 0; j < num_aes; ++j) {
    std::size_t idx = 0;
    double sum = 0.0, delta_sum = 0.0, positive = 0.0;
    for (const auto& chain : draws.chains) {
      for (int t = 0; t < chain.num_draws; ++t) {
        const double b = chain.beta_at(t, j);
        column[idx++] = b;
        sum += b;
        delta_sum += chain.delta_at(t, j);
        positive += b > 0.0 ? 1.0 : 0.0;
      }
    }
    auto& ae = out.aes[j];
    ae.term = j < static_cast<int>(draws.ae_vocabulary.size()) ? draws.ae_vocabulary[j] : "AE" + std::to_string(j + 1);
    ae.mean = sum / static_cast<double>(total);
    ae.median = quantile(column, 0.5);
    ae.ci_low = quantile(column, 0.025);
    ae.ci_high = quantile(column, 0.975);
    ae.selection_prob = delta_sum / static_cast<double>(total);
    ae.prob_positive = positive / static_cast<double>(total);
  }
  if (draws.chains.size() >= 2) out.diagnostics = gelman_rubin_beta(draws);
  return out;
}

Rhat gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
  const std::size_t len = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != len) throw std::invalid_argument("gelman_rubin: chains must have equal length");
  if (len < 4) throw std::invalid_argument("gelman_rubin: chains need at least four draws");
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    const double m = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(len);
    double ss = 0.0;
    for (double x : c) ss += (x - m) * (x - m);
    means.push_back(m);
    vars.push_back(ss / (static_cast<double>(len) - 1.0));
  }
  const double n = static_cast<double>(len);
  const double m = static_cast<double>(chains.size());
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  if (!(w > 0.0)) return {1.0, true};
  // Values below 1 carry no information; B = 0 reports exactly 1.
  const double var_plus = (n - 1.0) / n * w + (m + 1.0) / m * b / n;
  return {std::max(1.0, std::sqrt(var_plus / w)), false};
}

RhatResult gelman_rubin_beta(const DrawStore& draws) {
  RhatResult out;
  const int num_aes = draws.num_aes();
  std::size_t len = draws.chains.front().num_draws;
  for (const auto& c : draws.chains) len = std::min<std::size_t>(len, c.num_draws);
  out.rhat.assign(num_aes, 1.0);
  out.degenerate.assign(num_aes, false);
  out.max_rhat = 1.0;
  if (draws.chains.size() < 2 || len < 4) return out;
  std::vector<std::vector<double>> per_chain(draws.chains.size(), std::vector<double>(len));
  for (int j = 0; j < num_aes; ++j) {
    for (std::size_t c = 0; c < draws.chains.size(); ++c)
      for (std::size_t t = 0; t < len; ++t) per_chain[c][t] = draws.chains[c].beta_at(static_cast<int>(t), j);
    const auto r = gelman_rubin(per_chain);
    out.rhat[j] = r.value;
    out.degenerate[j] = r.degenerate;
    out.max_rhat = std::max(out.max_rhat, r.value);
  }
  return out;
}

FdrSelection fdr_select(std::span<const double> probs, double alpha, std::span<const double> effects,
                        double effect_threshold) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("fdr_select: alpha must lie in (0, 1)");
  if (!effects.empty() && effects.size() != probs.size())
    throw std::invalid_argument("fdr_select: effects size mismatch");
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
  FdrSelection out;
  double cumulative = 0.0;
  for (std::size_t m = 1; m <= order.size(); ++m) {
    cumulative += 1.0 - probs[order[m - 1]];
    if (cumulative / static_cast<double>(m) <= alpha) out.num_passing = static_cast<int>(m);
  }
  if (out.num_passing > 0) out.cutoff = probs[order[out.num_passing - 1]];
  for (int i = 0; i < out.num_passing; ++i) {
    const int idx = order[i];
    if (effects.empty() || effects[idx] > effect_threshold) out.selected.push_back(idx);
  }
  return out;
}

std::vector<double> nc_adjust(const DrawStore& draws, const std::vector<int>& nc_indices) {
  if (nc_indices.size() < 2) throw std::invalid_argument("nc_adjust: need at least two negative controls");
  const int num_aes = draws.num_aes();
  for (int idx : nc_indices)
    if (idx < 0 || idx >= num_aes) throw std::invalid_argument("nc_adjust: control index out of range");
  std::vector<double> exceed(num_aes, 0.0);
  const double k = static_cast<double>(nc_indices.size());
  std::size_t total = 0;
  for (const auto& chain : draws.chains) {
    for (int t = 0; t < chain.num_draws; ++t) {
      double mean = 0.0;
      for (int idx : nc_indices) mean += chain.beta_at(t, idx);
      mean /= k;
      double ss = 0.0;
      for (int idx : nc_indices) {
        const double d = chain.beta_at(t, idx) - mean;
        ss += d * d;
      }
      const double threshold = mean + 2.0 * std::sqrt(ss / (k - 1.0));
      for (int j = 0; j < num_aes; ++j)
        if (chain.beta_at(t, j) > threshold) exceed[j] += 1.0;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("nc_adjust: draw store is empty");
  for (auto& e : exceed) e /= static_cast<double>(total);
  return exceed;
}

double corrected_log_odds_ratio(double in_signal, double in_unsignal, double out_signal, double out_unsignal) {
  return std::log((in_signal + 0.5) * (out_unsignal + 0.5) / ((in_unsignal + 0.5) * (out_signal + 0.5)));
}

double enrichment_log_odds(const std::vector<int>& members, const std::vector<std::uint8_t>& signaled) {
  double total_signaled = 0.0;
  for (auto s : signaled) total_signaled += s;
  double in_signal = 0.0;
  for (int m : members) in_signal += signaled[m];
  const double in_size = static_cast<double>(members.size());
  const double out_size = static_cast<double>(signaled.size()) - in_size;
  const double out_signal = total_signaled - in_signal;
  return corrected_log_odds_ratio(in_signal, in_size - in_signal, out_signal, out_size - out_signal);
}

std::vector<GroupEnrichment> enrichment(const DrawStore& draws, const std::map<std::string, std::vector<int>>& groups,
                                        const EnrichmentOptions& options, std::vector<std::string>* warnings) {
  const int num_aes = draws.num_aes();
  std::vector<GroupEnrichment> out;
  std::vector<const std::vector<int>*> members;
  for (const auto& [id, m] : groups) {
    if (static_cast<int>(m.size()) <= options.min_group_size) continue;
    if (static_cast<int>(m.size()) >= num_aes) {
      if (warnings) warnings->push_back("group '" + id + "' spans the whole vocabulary; enrichment undefined");
      continue;
    }
    out.push_back({id, static_cast<int>(m.size()), 0.0, false});
    members.push_back(&m);
  }
  if (out.empty()) return out;
  std::vector<std::uint8_t> signaled(num_aes);
  std::size_t total = 0;
  for (const auto& chain : draws.chains) {
    for (int t = 0; t < chain.num_draws; ++t) {
      for (int j = 0; j < num_aes; ++j) signaled[j] = static_cast<std::uint8_t>(chain.delta_at(t, j));
      for (std::size_t g = 0; g < out.size(); ++g)
        if (enrichment_log_odds(*members[g], signaled) > kLog2) out[g].probability += 1.0;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("enrichment: draw store is empty");
  std::vector<double> probs;
  for (auto& g : out) {
    g.probability /= static_cast<double>(total);
    probs.push_back(g.probability);
  }
  for (int idx : fdr_select(probs, options.fdr_alpha).selected) out[idx].flagged = true;
  return out;
}

void flag_signals(PosteriorSummary& summary, const SignalOptions& options) {
  std::vector<double> probs, effects, nc;
  for (const auto& ae : summary.aes) {
    probs.push_back(ae.selection_prob);
    effects.push_back(ae.mean);
  }
  for (auto& ae : summary.aes) ae.fdr_signal = ae.nc_signal = false;
  for (int idx : fdr_select(probs, options.fdr_alpha, effects, options.effect_threshold).selected)
    summary.aes[idx].fdr_signal = true;
  if (!summary.aes.empty() && summary.aes.front().nc_prob) {
    for (const auto& ae : summary.aes) nc.push_back(ae.nc_prob.value_or(0.0));
    for (int idx : fdr_select(nc, options.fdr_alpha, effects, options.effect_threshold).selected)
      summary.aes[idx].nc_signal = true;
  }
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  return q + "\"";
}

}  // namespace

void write_summary_csv(std::ostream& out, const PosteriorSummary& summary) {
  out << "ae,logor_ci,mean,median,ci_low,ci_high,selection_prob,prob_positive,ncprob,fdr_signal,nc_signal,rhat\n";
  for (std::size_t j = 0; j < summary.aes.size(); ++j) {
    const auto& ae = summary.aes[j];
    out << csv_field(ae.term) << ',' << '"' << fixed(ae.mean, 2) << " [" << fixed(ae.ci_low, 2) << ',' << fixed(ae.ci_high, 2)
        << "]\"," << fixed(ae.mean) << ',' << fixed(ae.median) << ',' << fixed(ae.ci_low) << ','
        << fixed(ae.ci_high) << ',' << fixed(ae.selection_prob) << ',' << fixed(ae.prob_positive) << ','
        << (ae.nc_prob ? fixed(*ae.nc_prob) : std::string()) << ',' << (ae.fdr_signal ? 1 : 0) << ','
        << (ae.nc_signal ? 1 : 0) << ','
        << (j < summary.diagnostics.rhat.size() ? fixed(summary.diagnostics.rhat[j]) : std::string()) << '\n';
  }
}

void write_enrichment_csv(std::ostream& out, const std::vector<GroupEnrichment>& groups) {
  out << "group,size,enrichment_prob,flag\n";
  for (const auto& g : groups) out << csv_field(g.group) << ',' << g.size << ',' << fixed(g.probability) << ',' << (g.flagged ? 1 : 0) << '\n';
}

}  // namespace bgrass
