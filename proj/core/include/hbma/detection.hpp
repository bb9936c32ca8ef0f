#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hbma/spectral.hpp"

namespace hbma {

/// Background mean and shrunk covariance, plus the symmetric whitening
/// matrix W = Sigma^(-1/2).
struct BackgroundStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd whitening;
  double shrinkage = 0.0;
  std::size_t pixel_count = 0;

  Eigen::VectorXd whiten(const Eigen::Ref<const Eigen::VectorXd>& x) const { return whitening * x; }
};

inline constexpr double kDefaultShrinkage = 0.01;

/// Sample mean/covariance over the cube (pixels with mask value 0 are
/// skipped), shrunk toward the diagonal: (1 - lambda) S + lambda diag(S).
BackgroundStats background_stats(const ImageCube& cube, double shrinkage = kDefaultShrinkage,
                                 std::span<const std::uint8_t> pixel_mask = {}, unsigned threads = 1);

/// Signed cosine between W(x - mu) and W(t - mu).
double ace_score(const Spectrum& pixel, const Spectrum& target, const BackgroundStats& stats);
double ace_score(const Eigen::Ref<const Eigen::VectorXd>& pixel, const Eigen::Ref<const Eigen::VectorXd>& target,
                 const BackgroundStats& stats);

/// Cosine between W x and W t without mean removal. Used to compare raw or
/// background-removed spectra against a target in whitened coordinates.
double whitened_correlation(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& t,
                            const BackgroundStats& stats);

struct DetectionMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> scores;  // row-major

  double at(std::size_t row, std::size_t col) const { return scores[row * cols + col]; }
};

struct Roi {
  std::vector<PixelCoord> pixels;  // row-major order
  PixelCoord peak;
  double peak_score = 0.0;
  PixelCoord min_corner;  // inclusive bounding box
  PixelCoord max_corner;
  Spectrum mean_spectrum;
};

struct Detection {
  DetectionMap map;
  std::vector<Roi> rois;  // descending peak score
};

DetectionMap ace_map(const ImageCube& cube, const Spectrum& target, const BackgroundStats& stats,
                     unsigned threads = 1);

/// 8-connected components of pixels whose score exceeds the threshold.
std::vector<std::vector<PixelCoord>> label_components(const DetectionMap& map, double threshold);

Detection detect(const ImageCube& cube, const Spectrum& target, const BackgroundStats& stats, double threshold,
                 unsigned threads = 1);

struct BackgroundRemoval {
  Spectrum removed;                      // p - sum a_i s_i
  double target_abundance = 0.0;         // a_t
  std::vector<double> background_abundances;
  double rss = 0.0;
};

/// Joint least-squares fit p ~ a_t s_t + sum a_i s_i (no intercept) over the
/// jointly valid bands; the background contribution is then subtracted.
BackgroundRemoval background_removal(const Spectrum& pixel, const Spectrum& target,
                                     std::span<const Spectrum> backgrounds);

struct AnnulusOptions {
  std::size_t inner_margin = 1;  // pixels beyond the ROI bounding box
  std::size_t outer_margin = 5;
  std::size_t max_spectra = 24;
};

/// Pixels in the ring between the ROI bounding box grown by inner_margin and
/// by outer_margin, thinned by an even stride to at most max_spectra.
std::vector<PixelCoord> annulus_pixels(const ImageCube& cube, const Roi& roi, const AnnulusOptions& options = {});
std::vector<PixelCoord> annulus_pixels(std::size_t rows, std::size_t cols, PixelCoord min_corner,
                                       PixelCoord max_corner, const AnnulusOptions& options = {});

}  // namespace hbma
