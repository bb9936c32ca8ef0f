#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "hbma/random.hpp"
#include "hbma/regression.hpp"
#include "hbma/spectral.hpp"

namespace hbma::bench {

inline GridPtr grid(std::size_t bands) {
  std::vector<double> w(bands);
  for (std::size_t b = 0; b < bands; ++b) w[b] = 0.4 + 2.1 * static_cast<double>(b) / static_cast<double>(bands - 1);
  return make_grid(std::move(w));
}

// Smooth-ish random columns; the response mixes the first three (or fewer).
inline RegressionProblem problem(std::size_t p, std::size_t bands, std::uint64_t seed = 1) {
  Rng rng(seed);
  RegressionProblem out;
  const auto n = static_cast<Eigen::Index>(bands);
  out.candidates.resize(n, static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    const double f = rng.uniform(1.0, 6.0);
    const double phase = rng.uniform(0.0, 3.0);
    for (Eigen::Index b = 0; b < n; ++b) {
      out.candidates(b, static_cast<Eigen::Index>(j)) =
          0.5 + 0.3 * std::sin(f * static_cast<double>(b) / static_cast<double>(n) + phase) + rng.normal(0.0, 0.02);
    }
    out.names.push_back("s" + std::to_string(j));
  }
  out.response = Eigen::VectorXd::Zero(n);
  for (std::size_t j = 0; j < std::min<std::size_t>(p, 3); ++j) {
    out.response += (0.4 - 0.1 * static_cast<double>(j)) * out.candidates.col(static_cast<Eigen::Index>(j));
  }
  for (Eigen::Index b = 0; b < n; ++b) out.response[b] += rng.normal(0.0, 0.01);
  return out;
}

inline ImageCube cube(std::size_t rows, std::size_t cols, std::size_t bands, std::uint64_t seed = 2) {
  Rng rng(seed);
  std::vector<double> data(rows * cols * bands);
  for (auto& v : data) v = 0.3 + rng.normal(0.0, 0.05);
  return ImageCube(rows, cols, grid(bands), std::move(data));
}

}  // namespace hbma::bench
