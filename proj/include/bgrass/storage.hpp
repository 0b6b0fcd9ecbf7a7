#pragma once

// Columnar binary draw files and content hashing.
//
// draws.bin layout (little-endian):
//   "BGRDRAW1"                                   8 bytes
//   u32 num_chains, u32 num_aes, u32 num_predictors
//   per chain: u64 seed, u32 num_draws
//   per chain, column blocks (each column holds num_draws values):
//     beta      f64, one column per AE
//     delta     u8,  one column per AE
//     alpha     f64, one column per (AE, predictor), predictor fastest
//     deviance  f64, one column

#include <string>
#include <string_view>

#include "bgrass/engine.hpp"

namespace bgrass {

std::string sha256_hex(std::string_view data);
// Throws ConfigError if the file cannot be read.
std::string sha256_file(const std::string& path);

void write_draws(const std::string& path, const DrawStore& draws);
// Restores chains and seeds; schedule/hyperparameters live in the manifest.
DrawStore read_draws(const std::string& path);

}  // namespace bgrass
