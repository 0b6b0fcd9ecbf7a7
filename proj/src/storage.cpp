#include "bgrass/storage.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>

namespace bgrass {
namespace {

static_assert(std::endian::native == std::endian::little, "draw files assume a little-endian host");

constexpr char kMagic[8] = {'B', 'G', 'R', 'D', 'R', 'A', 'W', '1'};

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("draw file is truncated");
  return value;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file for hashing: " + path);
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(data);
}

void write_draws(const std::string& path, const DrawStore& draws) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write draw file: " + path);
  const auto num_aes = static_cast<std::uint32_t>(draws.num_aes());
  const auto num_pred = static_cast<std::uint32_t>(draws.num_predictors());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(draws.chains.size()));
  put(out, num_aes);
  put(out, num_pred);
  for (const auto& c : draws.chains) {
    put<std::uint64_t>(out, c.seed);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.num_draws));
  }
  for (const auto& c : draws.chains) {
    for (std::uint32_t j = 0; j < num_aes; ++j)
      for (int t = 0; t < c.num_draws; ++t) put<double>(out, c.beta_at(t, static_cast<int>(j)));
    for (std::uint32_t j = 0; j < num_aes; ++j)
      for (int t = 0; t < c.num_draws; ++t) put<std::uint8_t>(out, static_cast<std::uint8_t>(c.delta_at(t, static_cast<int>(j))));
    for (std::uint32_t j = 0; j < num_aes; ++j)
      for (std::uint32_t l = 0; l < num_pred; ++l)
        for (int t = 0; t < c.num_draws; ++t)
          put<double>(out, c.alpha_at(t, static_cast<int>(j), static_cast<int>(l)));
    for (double d : c.deviance) put<double>(out, d);
  }
  if (!out) throw std::runtime_error("error while writing draw file: " + path);
}

DrawStore read_draws(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open draw file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not a draw file: " + path);
  const auto num_chains = get<std::uint32_t>(in);
  const auto num_aes = get<std::uint32_t>(in);
  const auto num_pred = get<std::uint32_t>(in);
  DrawStore store;
  store.chains.resize(num_chains);
  for (auto& c : store.chains) {
    c.seed = get<std::uint64_t>(in);
    c.num_draws = static_cast<int>(get<std::uint32_t>(in));
    c.num_aes = static_cast<int>(num_aes);
    c.num_predictors = static_cast<int>(num_pred);
  }
  for (auto& c : store.chains) {
    const std::size_t n = static_cast<std::size_t>(c.num_draws);
    c.beta.resize(n * num_aes);
    c.delta.resize(n * num_aes);
    c.alpha.resize(n * num_aes * num_pred);
    for (std::uint32_t j = 0; j < num_aes; ++j)
      for (std::size_t t = 0; t < n; ++t) c.beta[t * num_aes + j] = get<double>(in);
    for (std::uint32_t j = 0; j < num_aes; ++j)
      for (std::size_t t = 0; t < n; ++t) c.delta[t * num_aes + j] = get<std::uint8_t>(in);
    for (std::uint32_t j = 0; j < num_aes; ++j)
      for (std::uint32_t l = 0; l < num_pred; ++l)
        for (std::size_t t = 0; t < n; ++t) c.alpha[(t * num_aes + j) * num_pred + l] = get<double>(in);
    c.deviance.resize(n);
    for (std::size_t t = 0; t < n; ++t) c.deviance[t] = get<double>(in);
  }
  return store;
}

}  // namespace bgrass
