#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hbma/aggregate.hpp"
#include "hbma/detection.hpp"
#include "hbma/search.hpp"

namespace hbma::cli {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  fs::path output_dir;
};

struct DetectOptions {
  fs::path cube;
  fs::path cube_data;  // optional; located next to the header when empty
  fs::path target_lib;
  std::string target;
  double threshold = 0.5;
  double shrinkage = kDefaultShrinkage;
  bool resample = false;
};

struct DetectResult {
  Detection detection;
  BackgroundStats stats;
};

struct IdentifyOptions {
  fs::path spectrum;  // either this, or cube + roi
  fs::path cube;
  fs::path cube_data;
  fs::path roi;
  std::size_t roi_index = 0;
  bool background_removal = false;
  std::string backgrounds = "auto";  // auto | coords
  std::vector<PixelCoord> background_coords;
  fs::path target_lib;  // defaults to the identification library
  std::string target;   // target spectrum for background removal
  fs::path library;
  fs::path hierarchy;
  SearchStrategy strategy = SearchStrategy::occam;
  std::size_t max_size = 4;
  double window_c = 20.0;
  std::size_t iterations = 20000;
  bool occam_razor = false;
  bool resample = false;
  bool conditional = false;
};

struct IdentifyResult {
  ModelPosterior posterior;
  InclusionReport report;
  IdentificationTree tree;
  std::optional<BackgroundRemoval> removal;
  std::vector<PixelCoord> background_pixels;
};

struct TableOptions {
  fs::path csv;
  std::string response;
  SearchStrategy strategy = SearchStrategy::occam;
  std::optional<std::size_t> max_size;  // all predictors when unset
  double window_c = 20.0;
  std::size_t iterations = 20000;
  bool occam_razor = false;
  /// Named predictor groups, e.g. {"Police", {"Po1", "Po2"}}.
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
};

struct TableResult {
  ModelPosterior posterior;
  InclusionReport report;
  IdentificationTree tree;
};

/// ACE detection; writes scores.bin, scores.json and rois.json.
DetectResult cmd_detect(const GlobalOptions& global, const DetectOptions& options);

/// Optional background removal, model search, aggregation; writes
/// results.json and tree.dot.
IdentifyResult cmd_identify(const GlobalOptions& global, const IdentifyOptions& options);

/// Tabular BMA with an intercept; writes results.json and inclusion.csv.
TableResult cmd_bma_table(const GlobalOptions& global, const TableOptions& options);

/// "r,c;r,c;..." -> coordinates.
std::vector<PixelCoord> parse_coords(const std::string& text);

/// "Name=a,b" -> {"Name", {"a", "b"}}.
std::pair<std::string, std::vector<std::string>> parse_group(const std::string& text);

/// Full command-line entry point. Returns the process exit code:
/// 0 success, 2 input/validation error, 3 numerical/search error.
int run(int argc, char** argv);

}  // namespace hbma::cli
