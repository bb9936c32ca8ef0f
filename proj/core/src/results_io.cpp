#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hbma/errors.hpp"
#include "hbma/io.hpp"

namespace hbma {

namespace {

constexpr const char* kModule = "io-formats";

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string fixed4(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << v;
  return ss.str();
}

void emit_dot(const TreeNode& node, double parent_p, bool is_root, const DotOptions& options, std::size_t& next_id,
              std::ostringstream& out) {
  const std::size_t id = next_id++;
  double shown = node.probability;
  if (options.conditional && !is_root) shown = parent_p > 0.0 ? node.probability / parent_p : 0.0;
  out << "  n" << id << " [label=\"" << dot_escape(node.name) << "\\np=" << fixed4(shown) << "\"];\n";
  for (const auto& child : node.children) {
    const std::size_t child_id = next_id;
    emit_dot(child, node.probability, false, options, next_id, out);
    out << "  n" << id << " -> n" << child_id << ";\n";
  }
}

std::vector<std::pair<std::string, double>> sorted_pairs(const nlohmann::json& obj) {
  std::vector<std::pair<std::string, double>> out;
  for (auto it = obj.begin(); it != obj.end(); ++it) out.emplace_back(it.key(), it.value().get<double>());
  return out;
}

}  // namespace

std::string format_tree_dot(const IdentificationTree& tree, const DotOptions& options) {
  std::ostringstream out;
  out << "digraph identification {\n";
  out << "  node [shape=box];\n";
  std::size_t next_id = 0;
  emit_dot(tree.root, 1.0, true, options, next_id, out);
  out << "}\n";
  return out.str();
}

void write_tree_dot(const IdentificationTree& tree, const std::filesystem::path& path, const DotOptions& options) {
  write_text_file(path, format_tree_dot(tree, options));
}

nlohmann::json tree_to_json(const TreeNode& node) {
  nlohmann::json j;
  j["name"] = node.name;
  j["p"] = node.probability;
  j["children"] = nlohmann::json::array();
  for (const auto& child : node.children) j["children"].push_back(tree_to_json(child));
  return j;
}

TreeNode tree_from_json(const nlohmann::json& j) {
  TreeNode node;
  node.name = j.at("name").get<std::string>();
  node.probability = j.at("p").get<double>();
  for (const auto& child : j.at("children")) node.children.push_back(tree_from_json(child));
  return node;
}

nlohmann::json results_to_json(const ModelPosterior& posterior, const InclusionReport& report,
                               const IdentificationTree& tree) {
  nlohmann::json j;
  j["models"] = nlohmann::json::array();
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    const auto& m = posterior.models.models[i];
    nlohmann::json entry;
    entry["regressors"] = m.names;
    entry["coefficients"] = m.coefficients;
    entry["bic"] = m.bic;
    entry["probability"] = posterior.probabilities[i];
    if (m.intercept) entry["intercept"] = *m.intercept;
    j["models"].push_back(std::move(entry));
  }
  j["inclusion"] = nlohmann::json::object();
  j["averaged_coefficients"] = nlohmann::json::object();
  for (std::size_t k = 0; k < report.names.size(); ++k) {
    j["inclusion"][report.names[k]] = report.inclusion[k];
    j["averaged_coefficients"][report.names[k]] = report.averaged[k];
  }
  if (report.averaged_intercept) j["averaged_intercept"] = *report.averaged_intercept;
  j["tree"] = tree_to_json(tree.root);

  const auto& meta = posterior.models.metadata;
  nlohmann::json search;
  search["strategy"] = to_string(meta.strategy);
  search["models_retained"] = posterior.size();
  search["models_fitted"] = meta.fitted;
  search["models_flagged"] = meta.flagged;
  search["best_bic"] = posterior.models.best_bic;
  if (meta.strategy == SearchStrategy::occam) {
    search["levels"] = nlohmann::json::array();
    for (const auto& l : meta.levels) {
      search["levels"].push_back(
          {{"size", l.size}, {"candidates", l.candidates}, {"survivors", l.survivors}, {"cap_hit", l.cap_hit}});
    }
    search["excluded_by_submodel"] = meta.excluded_by_submodel;
  }
  if (meta.strategy == SearchStrategy::mc3) {
    search["accepted"] = meta.accepted;
    search["proposals"] = meta.proposals;
    search["visit_counts"] = meta.visit_counts;
  }
  j["search"] = std::move(search);
  return j;
}

std::string format_results_json(const ModelPosterior& posterior, const InclusionReport& report,
                                const IdentificationTree& tree) {
  return results_to_json(posterior, report, tree).dump(2) + "\n";
}

void write_results_json(const ModelPosterior& posterior, const InclusionReport& report, const IdentificationTree& tree,
                        const std::filesystem::path& path) {
  write_text_file(path, format_results_json(posterior, report, tree));
}

ResultsDocument read_results_json(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
    ResultsDocument doc;
    for (const auto& m : j.at("models")) {
      doc.models.push_back({m.at("regressors").get<std::vector<std::string>>(),
                            m.at("coefficients").get<std::vector<double>>(), m.at("bic").get<double>(),
                            m.at("probability").get<double>()});
    }
    doc.inclusion = sorted_pairs(j.at("inclusion"));
    doc.averaged_coefficients = sorted_pairs(j.at("averaged_coefficients"));
    doc.tree = tree_from_json(j.at("tree"));
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(kModule, path.filename().string() + ": " + e.what());
  }
}

void write_score_map(const DetectionMap& map, const std::filesystem::path& bin_path,
                     const std::filesystem::path& json_path, const nlohmann::json& extra) {
  std::vector<unsigned char> raw(map.scores.size() * sizeof(double));
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    unsigned char buf[sizeof(double)];
    std::memcpy(buf, &map.scores[i], sizeof(double));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(double));
    std::memcpy(raw.data() + i * sizeof(double), buf, sizeof(double));
  }
  std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(kModule, "cannot write '" + bin_path.string() + "'");
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw InputError(kModule, "failed writing '" + bin_path.string() + "'");

  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["rows"] = map.rows;
  meta["cols"] = map.cols;
  meta["dtype"] = "float64";
  meta["byte_order"] = "little";
  meta["layout"] = "row-major";
  meta["file"] = bin_path.filename().string();
  write_text_file(json_path, meta.dump(2) + "\n");
}

DetectionMap read_score_map(const std::filesystem::path& bin_path, const std::filesystem::path& json_path) {
  DetectionMap map;
  try {
    const auto meta = nlohmann::json::parse(read_text_file(json_path));
    map.rows = meta.at("rows").get<std::size_t>();
    map.cols = meta.at("cols").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(kModule, json_path.filename().string() + ": " + e.what());
  }
  const std::string raw = read_text_file(bin_path);
  if (raw.size() != map.rows * map.cols * sizeof(double)) {
    throw ParseError(kModule, bin_path.filename().string() + " size does not match rows x cols");
  }
  map.scores.resize(map.rows * map.cols);
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    unsigned char buf[sizeof(double)];
    std::memcpy(buf, raw.data() + i * sizeof(double), sizeof(double));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(double));
    std::memcpy(&map.scores[i], buf, sizeof(double));
  }
  return map;
}

nlohmann::json rois_to_json(const std::vector<Roi>& rois) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < rois.size(); ++i) {
    const auto& roi = rois[i];
    nlohmann::json pixels = nlohmann::json::array();
    for (const auto& p : roi.pixels) pixels.push_back({p.row, p.col});
    std::vector<double> mean(roi.mean_spectrum.values().data(),
                             roi.mean_spectrum.values().data() + roi.mean_spectrum.values().size());
    arr.push_back({{"id", i},
                   {"pixels", std::move(pixels)},
                   {"pixel_count", roi.pixels.size()},
                   {"peak", {roi.peak.row, roi.peak.col}},
                   {"peak_score", roi.peak_score},
                   {"bbox", {{"min", {roi.min_corner.row, roi.min_corner.col}},
                             {"max", {roi.max_corner.row, roi.max_corner.col}}}},
                   {"mean_spectrum", std::move(mean)}});
  }
  return arr;
}

void write_rois_json(const std::vector<Roi>& rois, const std::filesystem::path& path, const nlohmann::json& extra) {
  nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
  j["rois"] = rois_to_json(rois);
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<std::vector<PixelCoord>> read_roi_pixels(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    std::vector<std::vector<PixelCoord>> out;
    for (const auto& roi : j.at("rois")) {
      std::vector<PixelCoord> pixels;
      for (const auto& p : roi.at("pixels")) pixels.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
      if (pixels.empty()) throw ParseError(kModule, path.filename().string() + ": ROI with no pixels");
      out.push_back(std::move(pixels));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(kModule, path.filename().string() + ": " + e.what());
  }
}

}  // namespace hbma
