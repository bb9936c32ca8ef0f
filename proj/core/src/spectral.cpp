#include "hbma/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hbma/errors.hpp"
#include "hbma/random.hpp"

namespace hbma {

namespace {

constexpr const char* kModule = "spectral-core";

}  // namespace

BandGrid::BandGrid(std::vector<double> wavelengths_um) : wavelengths_(std::move(wavelengths_um)) {
  if (wavelengths_.size() < 2) throw InputError(kModule, "band grid needs at least 2 bands");
  for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
    const double w = wavelengths_[i];
    if (!std::isfinite(w) || w <= 0.0) {
      throw InputError(kModule, "wavelength " + std::to_string(i) + " is not finite and positive");
    }
    if (i > 0 && w <= wavelengths_[i - 1]) {
      throw InputError(kModule, "wavelengths not strictly increasing at band " + std::to_string(i));
    }
  }
}

BandGrid BandGrid::from_nanometers(const std::vector<double>& wavelengths_nm) {
  std::vector<double> um(wavelengths_nm.size());
  std::transform(wavelengths_nm.begin(), wavelengths_nm.end(), um.begin(),
                 [](double nm) { return nm / 1000.0; });
  return BandGrid(std::move(um));
}

GridPtr make_grid(std::vector<double> wavelengths_um) {
  return std::make_shared<const BandGrid>(std::move(wavelengths_um));
}

bool same_grid(const GridPtr& a, const GridPtr& b) {
  if (a == b) return true;
  return a && b && *a == *b;
}

Spectrum::Spectrum(std::string name, GridPtr grid, Eigen::VectorXd values,
                   std::vector<std::string> class_path)
    : name_(std::move(name)),
      grid_(std::move(grid)),
      values_(std::move(values)),
      class_path_(std::move(class_path)) {
  if (!grid_) throw InputError(kModule, "spectrum '" + name_ + "' has no band grid");
  if (static_cast<std::size_t>(values_.size()) != grid_->size()) {
    std::ostringstream msg;
    msg << "spectrum '" << name_ << "' has " << values_.size() << " values for " << grid_->size()
        << " bands";
    throw InputError(kModule, msg.str());
  }
  if (!values_.allFinite()) throw InputError(kModule, "spectrum '" + name_ + "' has non-finite values");
}

bool Spectrum::all_valid() const {
  return std::all_of(valid_.begin(), valid_.end(), [](std::uint8_t v) { return v != 0; });
}

Spectrum Spectrum::with_valid_mask(std::vector<std::uint8_t> mask) const {
  if (!mask.empty() && mask.size() != size()) {
    throw InputError(kModule, "valid mask length does not match spectrum '" + name_ + "'");
  }
  Spectrum out = *this;
  out.valid_ = std::move(mask);
  return out;
}

Spectrum Spectrum::renamed(std::string name, std::vector<std::string> class_path) const {
  Spectrum out = *this;
  out.name_ = std::move(name);
  out.class_path_ = std::move(class_path);
  return out;
}

SpectralLibrary::SpectralLibrary(GridPtr grid, std::vector<Spectrum> spectra)
    : grid_(std::move(grid)), spectra_(std::move(spectra)) {
  if (!grid_) throw InputError(kModule, "library has no band grid");
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> paths;
  names.reserve(spectra_.size());
  paths.reserve(spectra_.size());
  for (const auto& s : spectra_) {
    if (!same_grid(s.grid(), grid_)) {
      throw AlignmentError(kModule, "spectrum '" + s.name() + "' is not on the library grid");
    }
    names.push_back(s.name());
    paths.push_back(s.class_path());
  }
  hierarchy_ = ClassHierarchy(std::move(names), paths);
  band_mask_.assign(grid_->size(), 1);
}

std::size_t SpectralLibrary::find(std::string_view name) const {
  for (std::size_t i = 0; i < spectra_.size(); ++i) {
    if (spectra_[i].name() == name) return i;
  }
  return spectra_.size();
}

const Spectrum& SpectralLibrary::at(std::string_view name) const {
  const std::size_t i = find(name);
  if (i == spectra_.size()) throw InputError(kModule, "no spectrum named '" + std::string(name) + "'");
  return spectra_[i];
}

std::vector<std::string> SpectralLibrary::names() const {
  std::vector<std::string> out;
  out.reserve(spectra_.size());
  for (const auto& s : spectra_) out.push_back(s.name());
  return out;
}

SpectralLibrary SpectralLibrary::with_band_mask(std::vector<std::uint8_t> mask) const {
  if (mask.size() != grid_->size()) throw InputError(kModule, "band mask length does not match grid");
  SpectralLibrary out = *this;
  out.band_mask_ = std::move(mask);
  return out;
}

std::size_t SpectralLibrary::valid_band_count() const {
  return static_cast<std::size_t>(std::count(band_mask_.begin(), band_mask_.end(), 1));
}

ImageCube::ImageCube(std::size_t rows, std::size_t cols, GridPtr grid, std::vector<double> data)
    : rows_(rows), cols_(cols), grid_(std::move(grid)), data_(std::move(data)) {
  if (!grid_) throw InputError(kModule, "cube has no band grid");
  if (rows_ == 0 || cols_ == 0) throw InputError(kModule, "cube dimensions must be positive");
  if (data_.size() != rows_ * cols_ * grid_->size()) {
    throw InputError(kModule, "cube data size does not equal rows x cols x bands");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw InputError(kModule, "cube contains non-finite values");
  }
}

Spectrum resample(const Spectrum& spectrum, const GridPtr& target) {
  const BandGrid& src = *spectrum.grid();
  if (same_grid(spectrum.grid(), target)) {
    return Spectrum(spectrum.name(), target, spectrum.values(), spectrum.class_path())
        .with_valid_mask(spectrum.valid_mask());
  }
  if (target->back() < src.front() || target->front() > src.back()) {
    throw AlignmentError(kModule, "spectrum '" + spectrum.name() +
                                      "' does not overlap the target band grid");
  }
  const auto& values = spectrum.values();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(target->size()));
  std::vector<std::uint8_t> valid(target->size(), 0);
  const auto ws = src.wavelengths();
  for (std::size_t i = 0; i < target->size(); ++i) {
    const double w = (*target)[i];
    if (w < src.front() || w > src.back()) continue;
    auto hi = static_cast<std::size_t>(std::lower_bound(ws.begin(), ws.end(), w) - ws.begin());
    if (ws[hi] == w) {
      if (spectrum.valid(hi)) {
        out[static_cast<Eigen::Index>(i)] = values[static_cast<Eigen::Index>(hi)];
        valid[i] = 1;
      }
      continue;
    }
    const std::size_t lo = hi - 1;
    if (!spectrum.valid(lo) || !spectrum.valid(hi)) continue;
    const double t = (w - ws[lo]) / (ws[hi] - ws[lo]);
    out[static_cast<Eigen::Index>(i)] = (1.0 - t) * values[static_cast<Eigen::Index>(lo)] +
                                        t * values[static_cast<Eigen::Index>(hi)];
    valid[i] = 1;
  }
  if (std::all_of(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; })) valid.clear();
  return Spectrum(spectrum.name(), target, std::move(out), spectrum.class_path())
      .with_valid_mask(std::move(valid));
}

Spectrum mix(std::span<const MixComponent> components, double noise_sigma, std::uint64_t seed) {
  if (components.empty()) throw InputError(kModule, "mix needs at least one component");
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) {
    throw InputError(kModule, "noise sigma must be finite and non-negative");
  }
  const GridPtr& grid = components.front().spectrum->grid();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid->size()));
  std::vector<std::uint8_t> valid;
  for (const auto& c : components) {
    if (!same_grid(c.spectrum->grid(), grid)) {
      throw AlignmentError(kModule, "mixture component '" + c.spectrum->name() +
                                        "' is on a different band grid");
    }
    if (!std::isfinite(c.abundance)) throw InputError(kModule, "abundance must be finite");
    sum += c.abundance * c.spectrum->values();
    if (!c.spectrum->valid_mask().empty()) {
      if (valid.empty()) valid.assign(grid->size(), 1);
      for (std::size_t b = 0; b < valid.size(); ++b) valid[b] &= c.spectrum->valid(b) ? 1 : 0;
    }
  }
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    for (Eigen::Index b = 0; b < sum.size(); ++b) sum[b] += rng.normal(0.0, noise_sigma);
  }
  return Spectrum("mixture", grid, std::move(sum)).with_valid_mask(std::move(valid));
}

Spectrum extract_pixel(const ImageCube& cube, std::size_t row, std::size_t col) {
  const PixelCoord c{row, col};
  return average_pixels(cube, std::span<const PixelCoord>(&c, 1));
}

Spectrum average_pixels(const ImageCube& cube, std::span<const PixelCoord> coords) {
  if (coords.empty()) throw InputError(kModule, "average_pixels needs at least one coordinate");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cube.bands()));
  for (const auto& c : coords) {
    if (c.row >= cube.rows() || c.col >= cube.cols()) {
      std::ostringstream msg;
      msg << "pixel (" << c.row << ", " << c.col << ") outside " << cube.rows() << "x"
          << cube.cols() << " cube";
      throw BoundsError(kModule, msg.str());
    }
    const auto px = cube.pixel(c.row, c.col);
    sum += Eigen::Map<const Eigen::VectorXd>(px.data(), static_cast<Eigen::Index>(px.size()));
  }
  sum /= static_cast<double>(coords.size());
  std::ostringstream name;
  name << "pixel(" << coords.front().row << "," << coords.front().col << ")";
  if (coords.size() > 1) name << "+" << coords.size() - 1;
  return Spectrum(name.str(), cube.grid(), std::move(sum));
}

}  // namespace hbma
