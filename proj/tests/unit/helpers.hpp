#pragma once

#include <vector>

#include "bgrass/engine.hpp"

namespace testing {

// Store with one chain per entry of beta[c][t][j]; delta = (beta != 0), alpha zero.
inline bgrass::DrawStore make_store(const std::vector<std::vector<std::vector<double>>>& beta, int num_predictors = 1) {
  bgrass::DrawStore store;
  for (const auto& chain : beta) {
    bgrass::ChainDraws c;
    c.num_draws = static_cast<int>(chain.size());
    c.num_aes = chain.empty() ? 0 : static_cast<int>(chain.front().size());
    c.num_predictors = num_predictors;
    for (const auto& draw : chain) {
      for (double b : draw) {
        c.beta.push_back(b);
        c.delta.push_back(b != 0.0 ? 1 : 0);
      }
    }
    c.alpha.assign(static_cast<std::size_t>(c.num_draws) * c.num_aes * num_predictors, 0.0);
    c.deviance.assign(c.num_draws, 0.0);
    store.chains.push_back(std::move(c));
  }
  if (!store.chains.empty())
    for (int j = 0; j < store.chains.front().num_aes; ++j) store.ae_vocabulary.push_back("AE" + std::to_string(j));
  return store;
}

}  // namespace testing
