#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hbma/aggregate.hpp"
#include "hbma/detection.hpp"
#include "hbma/regression.hpp"
#include "hbma/spectral.hpp"

namespace hbma {

// ---------------------------------------------------------------------------
// ENVI cubes
// ---------------------------------------------------------------------------

enum class Interleave { bsq, bil, bip };

std::string to_string(Interleave interleave);

/// The subset of the ENVI header grammar this library understands.
struct EnviHeader {
  std::size_t samples = 0;  // columns
  std::size_t lines = 0;    // rows
  std::size_t bands = 0;
  std::size_t header_offset = 0;
  Interleave interleave = Interleave::bsq;
  int data_type = 4;   // 2 int16, 4 float32, 5 float64, 12 uint16
  int byte_order = 0;  // 0 little endian, 1 big endian
  std::vector<double> wavelength;
  std::string wavelength_units;  // as written; empty when absent
  std::vector<int> bbl;          // 1 good, 0 bad; empty when absent
  std::optional<double> reflectance_scale_factor;

  std::size_t element_size() const;
  /// Wavelengths converted to micrometers.
  std::vector<double> wavelengths_um() const;
};

EnviHeader parse_envi_header(const std::string& text);
EnviHeader read_envi_header(const std::filesystem::path& header_path);
std::string format_envi_header(const EnviHeader& header);

/// Locates the binary next to a header: same stem with no extension, or
/// .img/.dat/.bsq/.bil/.bip/.raw.
std::filesystem::path find_envi_data(const std::filesystem::path& header_path);

/// Loads a cube into (row, col, band) order. Integer data are divided by the
/// reflectance scale factor (10000 when absent); float data only when the
/// factor is present. Bands marked bad in `bbl` are dropped.
ImageCube read_envi(const std::filesystem::path& header_path, const std::filesystem::path& data_path);
ImageCube read_envi(const std::filesystem::path& header_path);

struct EnviWriteOptions {
  Interleave interleave = Interleave::bsq;
  int data_type = 4;
  int byte_order = 0;
  std::optional<double> reflectance_scale_factor;  // integers are stored as round(v * factor)
  std::vector<int> bbl;
  std::string wavelength_units = "Micrometers";
};

void write_envi(const ImageCube& cube, const std::filesystem::path& header_path,
                const std::filesystem::path& data_path, const EnviWriteOptions& options = {});

// ---------------------------------------------------------------------------
// Spectral libraries and tables
// ---------------------------------------------------------------------------

/// CSV: first column "wavelength_um" or "wavelength_nm", one spectrum per
/// further column with its name as the header. The hierarchy file is a JSON
/// object mapping spectrum name to its class path; names without an entry
/// land under "Unlabeled". An empty path means no hierarchy file.
SpectralLibrary read_library(const std::filesystem::path& csv_path,
                             const std::filesystem::path& hierarchy_path = {});

void write_library_csv(const SpectralLibrary& library, const std::filesystem::path& csv_path);
void write_hierarchy_json(const SpectralLibrary& library, const std::filesystem::path& path);

/// Single spectrum in the library CSV layout (first data column is used).
Spectrum read_spectrum_csv(const std::filesystem::path& csv_path);
void write_spectrum_csv(const Spectrum& spectrum, const std::filesystem::path& csv_path);

struct Table {
  std::vector<std::string> headers;
  Eigen::MatrixXd values;  // rows x columns

  std::optional<std::size_t> column(const std::string& name) const;
};

Table read_table_csv(const std::filesystem::path& csv_path);

/// Tabular BMA problem: one response column, every other column a candidate
/// predictor, intercept always present.
RegressionProblem make_table_problem(const Table& table, const std::string& response);

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct DotOptions {
  bool conditional = false;  // label children with p(node) / p(parent)
};

std::string format_tree_dot(const IdentificationTree& tree, const DotOptions& options = {});
void write_tree_dot(const IdentificationTree& tree, const std::filesystem::path& path, const DotOptions& options = {});

nlohmann::json tree_to_json(const TreeNode& node);
TreeNode tree_from_json(const nlohmann::json& j);

nlohmann::json results_to_json(const ModelPosterior& posterior, const InclusionReport& report,
                               const IdentificationTree& tree);
std::string format_results_json(const ModelPosterior& posterior, const InclusionReport& report,
                                const IdentificationTree& tree);
void write_results_json(const ModelPosterior& posterior, const InclusionReport& report,
                        const IdentificationTree& tree, const std::filesystem::path& path);

struct ResultsModel {
  std::vector<std::string> regressors;
  std::vector<double> coefficients;
  double bic = 0.0;
  double probability = 0.0;
};

struct ResultsDocument {
  std::vector<ResultsModel> models;
  std::vector<std::pair<std::string, double>> inclusion;  // sorted by name
  std::vector<std::pair<std::string, double>> averaged_coefficients;
  TreeNode tree;
};

ResultsDocument read_results_json(const std::filesystem::path& path);

/// Raw float64 little-endian row-major scores plus a JSON sidecar.
void write_score_map(const DetectionMap& map, const std::filesystem::path& bin_path,
                     const std::filesystem::path& json_path, const nlohmann::json& extra = {});
DetectionMap read_score_map(const std::filesystem::path& bin_path, const std::filesystem::path& json_path);

nlohmann::json rois_to_json(const std::vector<Roi>& rois);
void write_rois_json(const std::vector<Roi>& rois, const std::filesystem::path& path, const nlohmann::json& extra = {});

/// Pixel lists of every ROI in a rois.json file, in file order.
std::vector<std::vector<PixelCoord>> read_roi_pixels(const std::filesystem::path& path);

/// Writes text exactly, throwing InputError when the path is unwritable.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace hbma
