#pragma once

#include "biasaware/errors.hpp"
#include "biasaware/model.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>

namespace testutil {

/// Kind of the biasaware::Error thrown by f, or empty if none.
template <class F>
std::optional<biasaware::ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const biasaware::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  auto dir = std::filesystem::temp_directory_path() / "biasaware_tests";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::ofstream(p) << contents;
  return p;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

/// Random dataset with an intercept plus k1 - 1 normal baseline columns.
inline biasaware::Dataset random_dataset(biasaware::Index n, biasaware::Index k1, biasaware::Index k2,
                                         std::uint64_t seed, double beta = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  biasaware::Dataset d;
  d.Z1.resize(n, k1);
  for (biasaware::Index j = 0; j < k1; ++j)
    for (biasaware::Index i = 0; i < n; ++i) d.Z1(i, j) = j == 0 ? 1.0 : nd(rng);
  d.Z2.resize(n, k2);
  for (biasaware::Index j = 0; j < k2; ++j)
    for (biasaware::Index i = 0; i < n; ++i) d.Z2(i, j) = nd(rng);
  d.w.resize(n);
  for (biasaware::Index i = 0; i < n; ++i) d.w[i] = nd(rng);
  if (k2 > 0) d.w += d.Z2.rowwise().sum() / std::sqrt(static_cast<double>(k2));
  d.y.resize(n);
  for (biasaware::Index i = 0; i < n; ++i) d.y[i] = nd(rng);
  d.y += beta * d.w;
  return d;
}

}  // namespace testutil
