#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hbma/hierarchy.hpp"

namespace hbma {

/// Band-center wavelengths in micrometers, strictly increasing.
class BandGrid {
 public:
  explicit BandGrid(std::vector<double> wavelengths_um);

  static BandGrid from_nanometers(const std::vector<double>& wavelengths_nm);

  std::size_t size() const { return wavelengths_.size(); }
  double operator[](std::size_t i) const { return wavelengths_[i]; }
  std::span<const double> wavelengths() const { return wavelengths_; }
  double front() const { return wavelengths_.front(); }
  double back() const { return wavelengths_.back(); }

  friend bool operator==(const BandGrid&, const BandGrid&) = default;

 private:
  std::vector<double> wavelengths_;
};

using GridPtr = std::shared_ptr<const BandGrid>;

GridPtr make_grid(std::vector<double> wavelengths_um);

/// True when both grids hold identical wavelengths (pointer equality is a
/// shortcut, not a requirement).
bool same_grid(const GridPtr& a, const GridPtr& b);

/// Per-band reflectance on a shared grid, plus a validity mask for bands
/// that could not be populated (e.g. outside the range of a resample).
class Spectrum {
 public:
  Spectrum(std::string name, GridPtr grid, Eigen::VectorXd values,
           std::vector<std::string> class_path = {});

  const std::string& name() const { return name_; }
  const GridPtr& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  const std::vector<std::string>& class_path() const { return class_path_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  bool valid(std::size_t band) const { return valid_.empty() || valid_[band] != 0; }
  bool all_valid() const;
  /// Mask with one entry per band; an empty mask means every band is valid.
  const std::vector<std::uint8_t>& valid_mask() const { return valid_; }

  Spectrum with_valid_mask(std::vector<std::uint8_t> mask) const;
  Spectrum renamed(std::string name, std::vector<std::string> class_path) const;

 private:
  std::string name_;
  GridPtr grid_;
  Eigen::VectorXd values_;
  std::vector<std::string> class_path_;
  std::vector<std::uint8_t> valid_;
};

/// Band-aligned collection of labeled spectra and the class tree they induce.
class SpectralLibrary {
 public:
  SpectralLibrary(GridPtr grid, std::vector<Spectrum> spectra);

  const GridPtr& grid() const { return grid_; }
  const std::vector<Spectrum>& spectra() const { return spectra_; }
  std::size_t size() const { return spectra_.size(); }
  const Spectrum& operator[](std::size_t i) const { return spectra_[i]; }
  const ClassHierarchy& hierarchy() const { return hierarchy_; }

  /// Index of the named spectrum, or size() when absent.
  std::size_t find(std::string_view name) const;
  const Spectrum& at(std::string_view name) const;
  std::vector<std::string> names() const;

  /// Bands excluded from every regression (atmospheric absorption etc.).
  const std::vector<std::uint8_t>& band_mask() const { return band_mask_; }
  SpectralLibrary with_band_mask(std::vector<std::uint8_t> mask) const;
  std::size_t valid_band_count() const;

 private:
  GridPtr grid_;
  std::vector<Spectrum> spectra_;
  ClassHierarchy hierarchy_;
  std::vector<std::uint8_t> band_mask_;
};

/// Reflectance cube stored band-interleaved-by-pixel: (row, col, band) with
/// band fastest.
class ImageCube {
 public:
  ImageCube(std::size_t rows, std::size_t cols, GridPtr grid, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t bands() const { return grid_->size(); }
  const GridPtr& grid() const { return grid_; }

  double at(std::size_t row, std::size_t col, std::size_t band) const {
    return data_[(row * cols_ + col) * bands() + band];
  }
  std::span<const double> pixel(std::size_t row, std::size_t col) const {
    return {data_.data() + (row * cols_ + col) * bands(), bands()};
  }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  GridPtr grid_;
  std::vector<double> data_;
};

struct PixelCoord {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
  friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

/// Linear interpolation onto `target`. Target bands outside the source
/// wavelength range (or bracketed by an invalid source band) are marked
/// invalid and set to zero.
Spectrum resample(const Spectrum& spectrum, const GridPtr& target);

struct MixComponent {
  const Spectrum* spectrum;
  double abundance;
};

/// Linear mixture sum(a_i x_i) plus per-band N(0, noise_sigma^2) noise.
Spectrum mix(std::span<const MixComponent> components, double noise_sigma, std::uint64_t seed);

Spectrum extract_pixel(const ImageCube& cube, std::size_t row, std::size_t col);
Spectrum average_pixels(const ImageCube& cube, std::span<const PixelCoord> coords);

}  // namespace hbma
