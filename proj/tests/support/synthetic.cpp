#include "synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace hbma::testing {

namespace {

void add_bump(Eigen::VectorXd& v, const BandGrid& grid, double center, double width, double amplitude) {
  for (std::size_t b = 0; b < grid.size(); ++b) {
    const double z = (grid[b] - center) / width;
    v[static_cast<Eigen::Index>(b)] += amplitude * std::exp(-0.5 * z * z);
  }
}

Eigen::VectorXd clamp(Eigen::VectorXd v) { return v.cwiseMax(0.02).cwiseMin(0.95); }

}  // namespace

GridPtr synthetic_grid(std::size_t bands) {
  std::vector<double> w(bands);
  for (std::size_t b = 0; b < bands; ++b) w[b] = 0.4 + 2.1 * static_cast<double>(b) / static_cast<double>(bands - 1);
  return make_grid(std::move(w));
}

Eigen::VectorXd smooth_spectrum(Rng& rng, const BandGrid& grid) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid.size()));
  const double base = rng.uniform(0.1, 0.5);
  const double slope = rng.uniform(-0.1, 0.1);
  for (std::size_t b = 0; b < grid.size(); ++b) v[static_cast<Eigen::Index>(b)] = base + slope * (grid[b] - 1.45);
  const auto features = 3 + rng.index(4);
  for (std::uint64_t f = 0; f < features; ++f) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    add_bump(v, grid, rng.uniform(0.4, 2.5), rng.uniform(0.03, 0.3), sign * rng.uniform(0.05, 0.25));
  }
  return clamp(std::move(v));
}

Eigen::VectorXd perturb(Rng& rng, const Eigen::VectorXd& base, const BandGrid& grid, double amplitude) {
  Eigen::VectorXd v = base * rng.uniform(0.95, 1.05);
  for (int f = 0; f < 3; ++f) {
    add_bump(v, grid, rng.uniform(0.4, 2.5), rng.uniform(0.05, 0.4), rng.uniform(-amplitude, amplitude));
  }
  return clamp(std::move(v));
}

RegressionProblem random_instance(std::uint64_t seed, std::size_t p, std::size_t bands, double noise) {
  Rng rng(seed);
  const GridPtr grid = synthetic_grid(bands);
  RegressionProblem problem;
  problem.candidates.resize(static_cast<Eigen::Index>(bands), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    // Every third candidate is a near-duplicate of its predecessor so the
    // window holds competing models.
    if (j % 3 == 2) {
      problem.candidates.col(static_cast<Eigen::Index>(j)) =
          perturb(rng, problem.candidates.col(static_cast<Eigen::Index>(j - 1)), *grid, 0.03);
    } else {
      problem.candidates.col(static_cast<Eigen::Index>(j)) = smooth_spectrum(rng, *grid);
    }
    problem.names.push_back("s" + std::to_string(j));
  }
  const std::size_t active = 2 + rng.index(2);
  std::vector<std::size_t> order(p);
  for (std::size_t j = 0; j < p; ++j) order[j] = j;
  for (std::size_t j = p - 1; j > 0; --j) std::swap(order[j], order[rng.index(j + 1)]);
  problem.response = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bands));
  for (std::size_t a = 0; a < active; ++a) {
    problem.response += rng.uniform(0.2, 0.6) * problem.candidates.col(static_cast<Eigen::Index>(order[a]));
  }
  for (Eigen::Index b = 0; b < problem.response.size(); ++b) problem.response[b] += rng.normal(0.0, noise);
  return problem;
}

SyntheticLibrary make_library(std::uint64_t seed, std::size_t bands) {
  struct ClassSpec {
    std::vector<std::string> path;
    std::string prefix;
  };
  const std::vector<ClassSpec> classes{
      {{"Fabric", "Polymer", "Nylon"}, "N"},       {{"Fabric", "Polymer", "Polyester"}, "P"},
      {{"Fabric", "Natural", "Cotton"}, "C"},      {{"Vehicle", "Paint", "Green"}, "G"},
      {{"Vehicle", "Paint", "Tan"}, "T"},          {{"Vehicle", "Metal", "Steel"}, "S"},
      {{"Vegetation", "Grass", "Meadow"}, "VG"},   {{"Vegetation", "Tree", "Conifer"}, "VC"},
      {{"Soil", "Dirt", "Loam"}, "SL"},            {{"Soil", "Rock", "Gravel"}, "SR"},
  };
  Rng rng(seed);
  const GridPtr grid = synthetic_grid(bands);
  std::vector<Spectrum> spectra;
  Eigen::VectorXd nylon_base;
  for (const auto& c : classes) {
    const Eigen::VectorXd base = smooth_spectrum(rng, *grid);
    if (c.prefix == "N") nylon_base = base;
    for (int v = 1; v <= 4; ++v) {
      spectra.emplace_back(c.prefix + std::to_string(v), grid, perturb(rng, base, *grid, 0.02), c.path);
    }
  }
  return SyntheticLibrary{SpectralLibrary(grid, std::move(spectra)),
                          nylon_base,
                          {"N1", "N2", "N3", "N4"},
                          "Fabric/Polymer/Nylon",
                          {"VG1", "VC1", "SL1"}};
}

Spectrum fresh_target(const SyntheticLibrary& lib, std::uint64_t seed) {
  Rng rng(seed ^ 0x7a3c5e9b1d2f4861ULL);
  const GridPtr& grid = lib.library.grid();
  return Spectrum("target", grid, perturb(rng, lib.nylon_base, *grid, 0.02), {"Fabric", "Polymer", "Nylon"});
}

namespace {

// Three abundances summing to `total`, each at least 10% of it.
std::vector<double> split(Rng& rng, double total) {
  std::vector<double> a{rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)};
  const double s = a[0] + a[1] + a[2];
  for (auto& x : a) x *= total / s;
  return a;
}

}  // namespace

Spectrum mixed_pixel(const SyntheticLibrary& lib, const Spectrum& target, std::uint64_t seed, double target_abundance,
                     double noise) {
  Rng rng(seed ^ 0x1b873593ULL);
  const auto a = split(rng, 1.0 - target_abundance);
  std::vector<MixComponent> parts{{&target, target_abundance}};
  for (std::size_t i = 0; i < 3; ++i) parts.push_back({&lib.library.at(lib.backgrounds[i]), a[i]});
  return mix(parts, noise, seed).renamed("pixel", {});
}

Scene make_scene(const SyntheticLibrary& lib, std::uint64_t seed, std::size_t rows, std::size_t cols,
                 double target_abundance, double noise) {
  Rng rng(seed ^ 0x5bd1e995ULL);
  const GridPtr& grid = lib.library.grid();
  const std::size_t bands = grid->size();
  std::vector<Eigen::VectorXd> bg;
  for (const auto& name : lib.backgrounds) bg.push_back(lib.library.at(name).values());
  Spectrum target = fresh_target(lib, seed);

  const std::size_t r0 = 6 + rng.index(rows - 14);
  const std::size_t c0 = 6 + rng.index(cols - 14);
  std::vector<PixelCoord> implant;
  for (std::size_t r = r0; r < r0 + 3; ++r) {
    for (std::size_t c = c0; c < c0 + 3; ++c) implant.push_back({r, c});
  }

  std::vector<double> data(rows * cols * bands);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const bool in_implant = r >= r0 && r < r0 + 3 && c >= c0 && c < c0 + 3;
      const double t = in_implant ? target_abundance : 0.0;
      const auto a = split(rng, 1.0 - t);
      Eigen::VectorXd v = a[0] * bg[0] + a[1] * bg[1] + a[2] * bg[2];
      if (in_implant) v += t * target.values();
      double* out = data.data() + (r * cols + c) * bands;
      for (std::size_t b = 0; b < bands; ++b) out[b] = v[static_cast<Eigen::Index>(b)] + rng.normal(0.0, noise);
    }
  }
  return Scene{ImageCube(rows, cols, grid, std::move(data)), std::move(target), std::move(implant)};
}

}  // namespace hbma::testing
