#include "hbma/detection.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "hbma/errors.hpp"
#include "hbma/parallel.hpp"
#include "hbma/regression.hpp"

namespace hbma {

namespace {

constexpr const char* kModule = "detection";

// Row block size for the covariance reduction. Fixed so that the summation
// order, and therefore the result, does not depend on the thread count.
constexpr std::size_t kRowsPerBlock = 16;

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> px) {
  return {px.data(), static_cast<Eigen::Index>(px.size())};
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw NumericalError(kModule, std::string("zero-norm whitened ") + what);
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace

BackgroundStats background_stats(const ImageCube& cube, double shrinkage, std::span<const std::uint8_t> pixel_mask,
                                 unsigned threads) {
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw InputError(kModule, "shrinkage must lie in [0, 1]");
  const std::size_t pixels = cube.rows() * cube.cols();
  if (!pixel_mask.empty() && pixel_mask.size() != pixels) {
    throw InputError(kModule, "pixel mask size does not match the cube");
  }
  auto used = [&](std::size_t r, std::size_t c) { return pixel_mask.empty() || pixel_mask[r * cube.cols() + c] != 0; };

  const auto bands = static_cast<Eigen::Index>(cube.bands());
  const std::size_t blocks = (cube.rows() + kRowsPerBlock - 1) / kRowsPerBlock;

  std::vector<Eigen::VectorXd> partial_sum(blocks, Eigen::VectorXd::Zero(bands));
  std::vector<std::size_t> partial_count(blocks, 0);
  parallel_for(blocks, threads, [&](std::size_t blk) {
    const std::size_t end = std::min(cube.rows(), (blk + 1) * kRowsPerBlock);
    for (std::size_t r = blk * kRowsPerBlock; r < end; ++r) {
      for (std::size_t c = 0; c < cube.cols(); ++c) {
        if (!used(r, c)) continue;
        partial_sum[blk] += as_vector(cube.pixel(r, c));
        ++partial_count[blk];
      }
    }
  });
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(bands);
  std::size_t count = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    mean += partial_sum[b];
    count += partial_count[b];
  }
  if (count < 2) throw InputError(kModule, "background statistics need at least 2 pixels");
  mean /= static_cast<double>(count);

  std::vector<Eigen::MatrixXd> partial_cov(blocks, Eigen::MatrixXd::Zero(bands, bands));
  parallel_for(blocks, threads, [&](std::size_t blk) {
    const std::size_t end = std::min(cube.rows(), (blk + 1) * kRowsPerBlock);
    for (std::size_t r = blk * kRowsPerBlock; r < end; ++r) {
      for (std::size_t c = 0; c < cube.cols(); ++c) {
        if (!used(r, c)) continue;
        const Eigen::VectorXd d = as_vector(cube.pixel(r, c)) - mean;
        partial_cov[blk].selfadjointView<Eigen::Lower>().rankUpdate(d);
      }
    }
  });
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(bands, bands);
  for (const auto& p : partial_cov) cov += p;
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(count - 1);

  const Eigen::VectorXd diag = cov.diagonal();
  cov *= (1.0 - shrinkage);
  cov.diagonal() += shrinkage * diag;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError(kModule, "covariance eigendecomposition failed");
  const auto& values = eig.eigenvalues();
  const double largest = values.maxCoeff();
  if (!(largest > 0.0) || !(values.minCoeff() > largest * 1e-14)) {
    std::ostringstream msg;
    msg << "background covariance is not positive definite after shrinkage " << shrinkage
        << "; use a larger shrinkage or more background pixels";
    throw NumericalError(kModule, msg.str());
  }
  const Eigen::VectorXd inv_sqrt = values.cwiseSqrt().cwiseInverse();
  BackgroundStats stats;
  stats.whitening = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  stats.mean = std::move(mean);
  stats.covariance = std::move(cov);
  stats.shrinkage = shrinkage;
  stats.pixel_count = count;
  return stats;
}

double ace_score(const Eigen::Ref<const Eigen::VectorXd>& pixel, const Eigen::Ref<const Eigen::VectorXd>& target,
                 const BackgroundStats& stats) {
  if (pixel.size() != stats.mean.size() || target.size() != stats.mean.size()) {
    throw AlignmentError(kModule, "pixel, target and background statistics have different band counts");
  }
  const Eigen::VectorXd x = stats.whiten(pixel - stats.mean);
  const Eigen::VectorXd t = stats.whiten(target - stats.mean);
  if (t.norm() == 0.0) throw NumericalError(kModule, "zero-norm whitened target");
  return cosine(x, t, "pixel");
}

double ace_score(const Spectrum& pixel, const Spectrum& target, const BackgroundStats& stats) {
  if (!same_grid(pixel.grid(), target.grid())) {
    throw AlignmentError(kModule, "pixel and target are on different band grids");
  }
  return ace_score(pixel.values(), target.values(), stats);
}

double whitened_correlation(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& t,
                            const BackgroundStats& stats) {
  if (x.size() != stats.mean.size() || t.size() != stats.mean.size()) {
    throw AlignmentError(kModule, "spectra and background statistics have different band counts");
  }
  return cosine(stats.whiten(x), stats.whiten(t), "spectrum");
}

DetectionMap ace_map(const ImageCube& cube, const Spectrum& target, const BackgroundStats& stats, unsigned threads) {
  if (!same_grid(cube.grid(), target.grid())) {
    throw AlignmentError(kModule, "target '" + target.name() + "' is not on the cube band grid");
  }
  if (static_cast<std::size_t>(stats.mean.size()) != cube.bands()) {
    throw AlignmentError(kModule, "background statistics do not match the cube band count");
  }
  const Eigen::VectorXd t = stats.whiten(target.values() - stats.mean);
  const double t_norm = t.norm();
  if (t_norm == 0.0) throw NumericalError(kModule, "zero-norm whitened target");
  const Eigen::RowVectorXd t_dir = (t / t_norm).transpose();

  DetectionMap map{cube.rows(), cube.cols(), std::vector<double>(cube.rows() * cube.cols(), 0.0)};
  parallel_for(cube.rows(), threads, [&](std::size_t r) {
    Eigen::VectorXd w;
    for (std::size_t c = 0; c < cube.cols(); ++c) {
      w.noalias() = stats.whitening * (as_vector(cube.pixel(r, c)) - stats.mean);
      const double n = w.norm();
      // A pixel sitting exactly on the mean has no direction; score it 0.
      map.scores[r * cube.cols() + c] = n == 0.0 ? 0.0 : std::clamp(t_dir.dot(w) / n, -1.0, 1.0);
    }
  });
  return map;
}

std::vector<std::vector<PixelCoord>> label_components(const DetectionMap& map, double threshold) {
  std::vector<std::uint8_t> seen(map.scores.size(), 0);
  std::vector<std::vector<PixelCoord>> components;
  for (std::size_t r = 0; r < map.rows; ++r) {
    for (std::size_t c = 0; c < map.cols; ++c) {
      const std::size_t idx = r * map.cols + c;
      if (seen[idx] || !(map.scores[idx] > threshold)) continue;
      std::vector<PixelCoord> component;
      std::deque<PixelCoord> queue{{r, c}};
      seen[idx] = 1;
      while (!queue.empty()) {
        const PixelCoord p = queue.front();
        queue.pop_front();
        component.push_back(p);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const auto nr = static_cast<std::ptrdiff_t>(p.row) + dr;
            const auto nc = static_cast<std::ptrdiff_t>(p.col) + dc;
            if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(map.rows) ||
                nc >= static_cast<std::ptrdiff_t>(map.cols)) {
              continue;
            }
            const std::size_t nidx = static_cast<std::size_t>(nr) * map.cols + static_cast<std::size_t>(nc);
            if (seen[nidx] || !(map.scores[nidx] > threshold)) continue;
            seen[nidx] = 1;
            queue.push_back({static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)});
          }
        }
      }
      std::sort(component.begin(), component.end());
      components.push_back(std::move(component));
    }
  }
  return components;
}

Detection detect(const ImageCube& cube, const Spectrum& target, const BackgroundStats& stats, double threshold,
                 unsigned threads) {
  if (!(threshold > -1.0 && threshold < 1.0)) throw InputError(kModule, "threshold must lie in (-1, 1)");
  Detection out;
  out.map = ace_map(cube, target, stats, threads);
  for (auto& pixels : label_components(out.map, threshold)) {
    Roi roi{pixels, pixels.front(), -2.0, pixels.front(), pixels.front(), average_pixels(cube, pixels)};
    for (const auto& p : pixels) {
      const double s = out.map.at(p.row, p.col);
      if (s > roi.peak_score) {
        roi.peak_score = s;
        roi.peak = p;
      }
      roi.min_corner.row = std::min(roi.min_corner.row, p.row);
      roi.min_corner.col = std::min(roi.min_corner.col, p.col);
      roi.max_corner.row = std::max(roi.max_corner.row, p.row);
      roi.max_corner.col = std::max(roi.max_corner.col, p.col);
    }
    out.rois.push_back(std::move(roi));
  }
  std::stable_sort(out.rois.begin(), out.rois.end(),
                   [](const Roi& a, const Roi& b) { return a.peak_score > b.peak_score; });
  return out;
}

BackgroundRemoval background_removal(const Spectrum& pixel, const Spectrum& target,
                                     std::span<const Spectrum> backgrounds) {
  if (!same_grid(pixel.grid(), target.grid())) throw AlignmentError(kModule, "pixel and target grids differ");
  for (const auto& b : backgrounds) {
    if (!same_grid(pixel.grid(), b.grid())) {
      throw AlignmentError(kModule, "background '" + b.name() + "' is on a different grid");
    }
  }
  const std::size_t bands = pixel.size();
  std::vector<Eigen::Index> rows;
  for (std::size_t b = 0; b < bands; ++b) {
    bool ok = pixel.valid(b) && target.valid(b);
    for (const auto& s : backgrounds) ok = ok && s.valid(b);
    if (ok) rows.push_back(static_cast<Eigen::Index>(b));
  }
  if (backgrounds.size() + 1 >= rows.size()) {
    throw InputError(kModule, std::to_string(backgrounds.size() + 1) + " regressors need more than " +
                                  std::to_string(rows.size()) + " valid bands");
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  auto restrict = [&](const Spectrum& s) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = s.values()[rows[static_cast<std::size_t>(i)]];
    return v;
  };
  std::vector<std::string> names{target.name()};
  LeastSquaresFit state(restrict(pixel), false);
  state = state.extended(restrict(target), 0);
  for (std::size_t i = 0; i < backgrounds.size(); ++i) {
    state = state.extended(restrict(backgrounds[i]), i + 1);
    names.push_back(backgrounds[i].name());
  }
  const RegressionModel model = state.model(names);
  if (model.condition_flag) {
    std::ostringstream msg;
    msg << "degenerate background-removal design (condition " << model.condition << ")";
    const auto dependent = state.dependent_ids();
    if (!dependent.empty()) {
      msg << "; linearly dependent spectra:";
      for (auto id : dependent) msg << " '" << names[id] << "'";
    }
    throw NumericalError(kModule, msg.str());
  }

  BackgroundRemoval out{pixel, *model.coefficient_of(0), {}, model.rss};
  Eigen::VectorXd removed = pixel.values();
  for (std::size_t i = 0; i < backgrounds.size(); ++i) {
    const double a = *model.coefficient_of(i + 1);
    out.background_abundances.push_back(a);
    removed -= a * backgrounds[i].values();
  }
  std::vector<std::uint8_t> valid;
  if (rows.size() != bands) {
    valid.assign(bands, 0);
    for (auto r : rows) valid[static_cast<std::size_t>(r)] = 1;
    for (std::size_t b = 0; b < bands; ++b) {
      if (!valid[b]) removed[static_cast<Eigen::Index>(b)] = 0.0;
    }
  }
  out.removed = Spectrum(pixel.name() + " bkg-removed", pixel.grid(), std::move(removed)).with_valid_mask(std::move(valid));
  return out;
}

std::vector<PixelCoord> annulus_pixels(std::size_t rows, std::size_t cols, PixelCoord min_corner,
                                       PixelCoord max_corner, const AnnulusOptions& options) {
  if (options.outer_margin < options.inner_margin) throw InputError(kModule, "annulus outer margin below inner margin");
  auto distance = [](std::size_t v, std::size_t lo, std::size_t hi) -> std::size_t {
    if (v < lo) return lo - v;
    if (v > hi) return v - hi;
    return 0;
  };
  std::vector<PixelCoord> ring;
  const std::size_t r0 = min_corner.row > options.outer_margin ? min_corner.row - options.outer_margin : 0;
  const std::size_t c0 = min_corner.col > options.outer_margin ? min_corner.col - options.outer_margin : 0;
  const std::size_t r1 = std::min(rows - 1, max_corner.row + options.outer_margin);
  const std::size_t c1 = std::min(cols - 1, max_corner.col + options.outer_margin);
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t c = c0; c <= c1; ++c) {
      const std::size_t d = std::max(distance(r, min_corner.row, max_corner.row), distance(c, min_corner.col, max_corner.col));
      if (d >= options.inner_margin && d <= options.outer_margin) ring.push_back({r, c});
    }
  }
  if (options.max_spectra == 0 || ring.size() <= options.max_spectra) return ring;
  std::vector<PixelCoord> picked;
  picked.reserve(options.max_spectra);
  for (std::size_t i = 0; i < options.max_spectra; ++i) picked.push_back(ring[i * ring.size() / options.max_spectra]);
  return picked;
}

std::vector<PixelCoord> annulus_pixels(const ImageCube& cube, const Roi& roi, const AnnulusOptions& options) {
  return annulus_pixels(cube.rows(), cube.cols(), roi.min_corner, roi.max_corner, options);
}

}  // namespace hbma
