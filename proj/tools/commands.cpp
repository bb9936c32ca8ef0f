#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "hbma/errors.hpp"
#include "hbma/io.hpp"

namespace hbma::cli {

namespace {

constexpr const char* kModule = "cli";

// Exhaustive output is reported within the same window (and razor) as occam
// so the strategies are comparable; a huge --window-c keeps every model.
ModelSet windowed(const ModelSet& set, const SearchConfig& config) {
  ModelSet out = apply_window(set, config.window_c);
  if (config.submodel_exclusion) out = exclude_dominated_supermodels(out, nullptr);
  return out;
}

void prepare_output_dir(const fs::path& dir) {
  if (dir.empty()) throw InputError(kModule, "--output-dir is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError(kModule, "cannot create output directory '" + dir.string() + "'");
}

void require_file(const fs::path& path, const char* flag) {
  if (path.empty()) throw InputError(kModule, std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw InputError(kModule, std::string(flag) + ": no such file '" + path.string() + "'");
}

void validate_search_flags(std::size_t max_size, double window_c, std::size_t iterations) {
  if (max_size == 0) throw InputError(kModule, "--max-size must be at least 1");
  if (!(window_c > 1.0) || !std::isfinite(window_c)) throw InputError(kModule, "--window-c must be > 1");
  if (iterations == 0) throw InputError(kModule, "--iterations must be at least 1");
}

ImageCube load_cube(const fs::path& header, const fs::path& data) {
  return data.empty() ? read_envi(header) : read_envi(header, data);
}

// Brings `s` onto `grid`, or fails when resampling was not requested.
Spectrum align(const Spectrum& s, const GridPtr& grid, bool allow_resample, const std::string& what) {
  if (same_grid(s.grid(), grid)) return s;
  if (!allow_resample) {
    throw AlignmentError(kModule, what + " is on a different band grid; pass --resample to interpolate");
  }
  return resample(s, grid);
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_inclusion_csv(const InclusionReport& report) {
  std::ostringstream out;
  out << "name,pip,pip_percent,averaged_coefficient\n";
  for (std::size_t k = 0; k < report.names.size(); ++k) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.1f", 100.0 * report.inclusion[k]);
    out << csv_field(report.names[k]) << "," << g17(report.inclusion[k]) << "," << pct << ","
        << g17(report.averaged[k]) << "\n";
  }
  return out.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace

std::vector<PixelCoord> parse_coords(const std::string& text) {
  std::vector<PixelCoord> out;
  for (const auto& pair : split(text, ';')) {
    if (pair.empty()) continue;
    const auto rc = split(pair, ',');
    if (rc.size() != 2) throw InputError(kModule, "bad coordinate '" + pair + "', expected ROW,COL");
    try {
      std::size_t used_r = 0;
      std::size_t used_c = 0;
      const long long r = std::stoll(rc[0], &used_r);
      const long long c = std::stoll(rc[1], &used_c);
      if (used_r != rc[0].size() || used_c != rc[1].size() || r < 0 || c < 0) throw std::invalid_argument("");
      out.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c)});
    } catch (const std::logic_error&) {
      throw InputError(kModule, "bad coordinate '" + pair + "', expected non-negative ROW,COL");
    }
  }
  if (out.empty()) throw InputError(kModule, "no coordinates given");
  return out;
}

std::pair<std::string, std::vector<std::string>> parse_group(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw InputError(kModule, "bad group '" + text + "', expected NAME=a,b");
  std::string name = trim(text.substr(0, eq));
  std::vector<std::string> members;
  for (auto& m : split(text.substr(eq + 1), ',')) {
    if (!m.empty()) members.push_back(std::move(m));
  }
  if (name.empty() || members.empty()) throw InputError(kModule, "bad group '" + text + "', expected NAME=a,b");
  return {std::move(name), std::move(members)};
}

DetectResult cmd_detect(const GlobalOptions& global, const DetectOptions& options) {
  require_file(options.cube, "--cube");
  require_file(options.target_lib, "--target-lib");
  if (options.target.empty()) throw InputError(kModule, "--target is required");
  if (!(options.threshold > -1.0 && options.threshold < 1.0)) {
    throw InputError(kModule, "--threshold must lie in (-1, 1)");
  }
  if (!(options.shrinkage >= 0.0 && options.shrinkage <= 1.0)) {
    throw InputError(kModule, "--shrinkage must lie in [0, 1]");
  }
  prepare_output_dir(global.output_dir);

  const ImageCube cube = load_cube(options.cube, options.cube_data);
  const SpectralLibrary targets = read_library(options.target_lib);
  if (targets.find(options.target) == targets.size()) {
    throw InputError(kModule, "unknown target '" + options.target + "' in " + options.target_lib.filename().string());
  }
  const Spectrum target = align(targets.at(options.target), cube.grid(), options.resample, "target library");

  DetectResult result{.detection = {}, .stats = background_stats(cube, options.shrinkage, {}, global.threads)};
  result.detection = detect(cube, target, result.stats, options.threshold, global.threads);

  const nlohmann::json extra = {{"target", options.target},
                                {"threshold", options.threshold},
                                {"shrinkage", options.shrinkage},
                                {"detector", "ace"}};
  write_score_map(result.detection.map, global.output_dir / "scores.bin", global.output_dir / "scores.json", extra);
  write_rois_json(result.detection.rois, global.output_dir / "rois.json", extra);
  return result;
}

IdentifyResult cmd_identify(const GlobalOptions& global, const IdentifyOptions& options) {
  const bool from_spectrum = !options.spectrum.empty();
  const bool from_cube = !options.cube.empty() || !options.roi.empty();
  if (from_spectrum == from_cube) throw InputError(kModule, "give either --spectrum or --cube with --roi");
  if (from_spectrum) {
    require_file(options.spectrum, "--spectrum");
    if (options.background_removal) throw InputError(kModule, "--background-removal needs --cube and --roi");
  } else {
    require_file(options.cube, "--cube");
    require_file(options.roi, "--roi");
  }
  require_file(options.library, "--library");
  if (!options.hierarchy.empty()) require_file(options.hierarchy, "--hierarchy");
  validate_search_flags(options.max_size, options.window_c, options.iterations);
  if (options.background_removal) {
    if (options.target.empty()) throw InputError(kModule, "--background-removal needs --target");
    if (!options.target_lib.empty()) require_file(options.target_lib, "--target-lib");
    if (options.backgrounds != "auto" && options.backgrounds != "coords") {
      throw InputError(kModule, "--backgrounds must be 'auto' or 'coords'");
    }
    if (options.backgrounds == "coords" && options.background_coords.empty()) {
      throw InputError(kModule, "--backgrounds coords needs --background-coords");
    }
  }
  SearchConfig config;
  config.strategy = options.strategy;
  config.max_size = options.max_size;
  config.window_c = options.window_c;
  config.mc3_iterations = options.iterations;
  config.seed = global.seed;
  config.submodel_exclusion = options.occam_razor;
  config.threads = global.threads;
  config.validate();
  prepare_output_dir(global.output_dir);

  const SpectralLibrary library = read_library(options.library, options.hierarchy);
  IdentifyResult result{};

  std::optional<Spectrum> pixel;
  if (from_spectrum) {
    pixel = read_spectrum_csv(options.spectrum);
  } else {
    const ImageCube cube = load_cube(options.cube, options.cube_data);
    const auto rois = read_roi_pixels(options.roi);
    if (options.roi_index >= rois.size()) {
      throw InputError(kModule, "--roi-index " + std::to_string(options.roi_index) + " but the ROI file holds " +
                                    std::to_string(rois.size()) + " region(s)");
    }
    const auto& roi_pixels = rois[options.roi_index];
    pixel = average_pixels(cube, roi_pixels);

    if (options.background_removal) {
      const SpectralLibrary target_lib =
          options.target_lib.empty() ? library : read_library(options.target_lib, {});
      if (target_lib.find(options.target) == target_lib.size()) {
        throw InputError(kModule, "unknown target '" + options.target + "'");
      }
      const Spectrum target = align(target_lib.at(options.target), cube.grid(), options.resample, "target library");

      if (options.backgrounds == "coords") {
        result.background_pixels = options.background_coords;
      } else {
        PixelCoord lo = roi_pixels.front();
        PixelCoord hi = roi_pixels.front();
        for (const auto& p : roi_pixels) {
          lo = {std::min(lo.row, p.row), std::min(lo.col, p.col)};
          hi = {std::max(hi.row, p.row), std::max(hi.col, p.col)};
        }
        result.background_pixels = annulus_pixels(cube.rows(), cube.cols(), lo, hi);
        if (result.background_pixels.empty()) throw InputError(kModule, "ROI leaves no room for background pixels");
      }
      std::vector<Spectrum> backgrounds;
      for (const auto& p : result.background_pixels) {
        if (p.row >= cube.rows() || p.col >= cube.cols()) {
          throw BoundsError(kModule, "background pixel (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                                         ") outside the cube");
        }
        backgrounds.push_back(extract_pixel(cube, p.row, p.col));
      }
      result.removal = background_removal(*pixel, target, backgrounds);
      pixel = result.removal->removed;
    }
  }

  const Spectrum aligned = align(*pixel, library.grid(), options.resample, "pixel spectrum");
  const ModelSet models = [&] {
    switch (config.strategy) {
      case SearchStrategy::exhaustive: return windowed(exhaustive_search(aligned, library, config), config);
      case SearchStrategy::mc3: return mc3_search(aligned, library, config);
      case SearchStrategy::occam: break;
    }
    return occam_search(aligned, library, config);
  }();
  result.posterior = normalize(models, config.prior);
  result.report = averaged_coefficients(result.posterior);
  result.tree = build_tree(result.posterior, library.hierarchy());

  nlohmann::json doc = results_to_json(result.posterior, result.report, result.tree);
  doc["search"]["seed"] = global.seed;
  doc["search"]["max_size"] = config.max_size;
  doc["search"]["window_c"] = config.window_c;
  if (result.removal) {
    nlohmann::json bg = nlohmann::json::array();
    for (const auto& p : result.background_pixels) bg.push_back({p.row, p.col});
    doc["background_removal"] = {{"target", options.target},
                                 {"target_abundance", result.removal->target_abundance},
                                 {"background_abundances", result.removal->background_abundances},
                                 {"background_pixels", std::move(bg)},
                                 {"rss", result.removal->rss}};
  }
  write_text_file(global.output_dir / "results.json", doc.dump(2) + "\n");
  write_tree_dot(result.tree, global.output_dir / "tree.dot", {.conditional = options.conditional});
  return result;
}

TableResult cmd_bma_table(const GlobalOptions& global, const TableOptions& options) {
  require_file(options.csv, "--csv");
  if (options.response.empty()) throw InputError(kModule, "--response is required");
  validate_search_flags(options.max_size.value_or(1), options.window_c, options.iterations);
  prepare_output_dir(global.output_dir);

  const Table table = read_table_csv(options.csv);
  const RegressionProblem problem = make_table_problem(table, options.response);

  // Predictors not named by any group form a class of their own.
  std::map<std::string, std::string> group_of;
  std::set<std::string> group_names;
  for (const auto& [name, members] : options.groups) {
    if (!group_names.insert(name).second) throw InputError(kModule, "group '" + name + "' given twice");
    for (const auto& m : members) {
      if (std::find(problem.names.begin(), problem.names.end(), m) == problem.names.end()) {
        throw InputError(kModule, "group '" + name + "' names unknown predictor '" + m + "'");
      }
      if (!group_of.emplace(m, name).second) throw InputError(kModule, "predictor '" + m + "' is in two groups");
    }
  }
  std::vector<std::vector<std::string>> paths;
  for (const auto& n : problem.names) {
    auto it = group_of.find(n);
    paths.push_back({it == group_of.end() ? n : it->second});
  }
  const ClassHierarchy hierarchy(problem.names, paths);

  SearchConfig config;
  config.strategy = options.strategy;
  config.max_size = options.max_size.value_or(problem.names.size());
  config.window_c = options.window_c;
  config.mc3_iterations = options.iterations;
  config.seed = global.seed;
  config.submodel_exclusion = options.occam_razor;
  config.threads = global.threads;
  config.validate();

  TableResult result;
  ModelSet models = search(problem, config);
  if (config.strategy == SearchStrategy::exhaustive) models = windowed(std::move(models), config);
  result.posterior = normalize(models, config.prior);
  result.report = averaged_coefficients(result.posterior);
  result.tree = build_tree(result.posterior, hierarchy);

  nlohmann::json doc = results_to_json(result.posterior, result.report, result.tree);
  doc["search"]["seed"] = global.seed;
  doc["search"]["max_size"] = config.max_size;
  doc["search"]["window_c"] = config.window_c;
  doc["response"] = options.response;
  doc["observations"] = static_cast<std::size_t>(problem.response.size());
  write_text_file(global.output_dir / "results.json", doc.dump(2) + "\n");
  write_text_file(global.output_dir / "inclusion.csv", format_inclusion_csv(result.report));
  return result;
}

int run(int argc, char** argv) {
  CLI::App app{"Bayesian model averaging for spectral identification and tabular regression", "hbma"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hbma 0.1.0");

  GlobalOptions global;
  std::string output_dir;
  app.option_defaults()->always_capture_default();
  app.add_option("--seed", global.seed, "Random seed (MC3)");
  app.add_option("--threads", global.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--output-dir,--out", output_dir, "Directory for output files");

  const std::map<std::string, SearchStrategy> strategies{
      {"exhaustive", SearchStrategy::exhaustive}, {"occam", SearchStrategy::occam}, {"mc3", SearchStrategy::mc3}};

  DetectOptions detect_opts;
  auto* detect = app.add_subcommand("detect", "ACE target detection over an ENVI cube");
  detect->fallthrough();
  detect->add_option("--cube", detect_opts.cube, "ENVI header")->required();
  detect->add_option("--cube-data", detect_opts.cube_data, "ENVI binary (default: next to the header)");
  detect->add_option("--target-lib", detect_opts.target_lib, "Library CSV holding the target")->required();
  detect->add_option("--target", detect_opts.target, "Target spectrum name")->required();
  detect->add_option("--threshold", detect_opts.threshold, "ROI score threshold");
  detect->add_option("--shrinkage", detect_opts.shrinkage, "Covariance shrinkage toward the diagonal");
  detect->add_flag("--resample", detect_opts.resample, "Interpolate the target onto the cube grid");

  IdentifyOptions id_opts;
  std::string bg_coords;
  auto* identify = app.add_subcommand("identify", "Identify the materials in a spectrum or ROI");
  identify->fallthrough();
  identify->add_option("--spectrum", id_opts.spectrum, "Spectrum CSV");
  identify->add_option("--cube", id_opts.cube, "ENVI header");
  identify->add_option("--cube-data", id_opts.cube_data, "ENVI binary (default: next to the header)");
  identify->add_option("--roi", id_opts.roi, "rois.json from detect");
  identify->add_option("--roi-index", id_opts.roi_index, "Which ROI to identify");
  identify->add_flag("--background-removal", id_opts.background_removal, "Subtract fitted background spectra");
  identify->add_option("--backgrounds", id_opts.backgrounds, "auto (annulus) or coords")
      ->check(CLI::IsMember({"auto", "coords"}));
  identify->add_option("--background-coords", bg_coords, "ROW,COL;ROW,COL;...");
  identify->add_option("--target", id_opts.target, "Target spectrum for background removal");
  identify->add_option("--target-lib", id_opts.target_lib, "Library holding --target (default: --library)");
  identify->add_option("--library", id_opts.library, "Library CSV")->required();
  identify->add_option("--hierarchy", id_opts.hierarchy, "Hierarchy JSON");
  identify->add_option("--strategy", id_opts.strategy, "occam, mc3 or exhaustive")
      ->transform(CLI::CheckedTransformer(strategies));
  identify->add_option("--max-size", id_opts.max_size, "Largest model size");
  identify->add_option("--window-c", id_opts.window_c, "Occam's window ratio");
  identify->add_option("--iterations", id_opts.iterations, "MC3 iterations");
  identify->add_flag("--occam-razor", id_opts.occam_razor, "Drop models with a better sub-model");
  identify->add_flag("--resample", id_opts.resample, "Interpolate spectra onto the library grid");
  identify->add_flag("--conditional", id_opts.conditional, "Label tree nodes with p(node | parent)");

  TableOptions table_opts;
  std::vector<std::string> groups;
  std::size_t table_max_size = 0;
  auto* table = app.add_subcommand("bma-table", "BMA over the columns of a CSV table");
  table->fallthrough();
  table->add_option("--csv", table_opts.csv, "Input table")->required();
  table->add_option("--response", table_opts.response, "Response column")->required();
  table->add_option("--strategy", table_opts.strategy, "occam, mc3 or exhaustive")
      ->transform(CLI::CheckedTransformer(strategies));
  table->add_option("--max-size", table_max_size, "Largest model size (default: all predictors)");
  table->add_option("--window-c", table_opts.window_c, "Occam's window ratio");
  table->add_option("--iterations", table_opts.iterations, "MC3 iterations");
  table->add_flag("--occam-razor", table_opts.occam_razor, "Drop models with a better sub-model");
  table->add_option("--group", groups, "Predictor class NAME=a,b (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    global.output_dir = output_dir;
    if (detect->parsed()) {
      const auto r = cmd_detect(global, detect_opts);
      std::cout << "detect: " << r.detection.rois.size() << " ROI(s) written to " << global.output_dir.string()
                << "\n";
    } else if (identify->parsed()) {
      if (!bg_coords.empty()) id_opts.background_coords = parse_coords(bg_coords);
      const auto r = cmd_identify(global, id_opts);
      std::cout << "identify: " << r.posterior.size() << " model(s) retained, results in "
                << global.output_dir.string() << "\n";
    } else if (table->parsed()) {
      if (table_max_size > 0) table_opts.max_size = table_max_size;
      for (const auto& g : groups) table_opts.groups.push_back(parse_group(g));
      const auto r = cmd_bma_table(global, table_opts);
      std::cout << "bma-table: " << r.posterior.size() << " model(s) retained, results in "
                << global.output_dir.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.category() == Error::Category::numerical ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace hbma::cli
