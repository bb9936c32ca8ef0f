#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "hbma/io.hpp"
#include "hbma/random.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace hbma;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("hbma_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hbma");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

nlohmann::json load_json(const std::string& path) { return nlohmann::json::parse(read_text_file(path)); }

// Synthetic scene and library on disk.
struct SceneFiles {
  testing::SyntheticLibrary lib;
  testing::Scene scene;
};

SceneFiles write_scene(const TempDir& dir, std::uint64_t seed) {
  auto lib = testing::make_library(seed);
  auto scene = testing::make_scene(lib, seed);
  SceneFiles f{std::move(lib), std::move(scene)};
  write_library_csv(f.lib.library, dir / "lib.csv");
  write_hierarchy_json(f.lib.library, dir / "lib.json");
  EnviWriteOptions o;
  o.data_type = 5;
  write_envi(f.scene.cube, dir / "cube.hdr", dir / "cube.img", o);
  return f;
}

void write_table(const std::string& path, const Eigen::MatrixXd& values, const std::vector<std::string>& headers) {
  std::ofstream out(path);
  for (std::size_t j = 0; j < headers.size(); ++j) out << (j ? "," : "") << headers[j];
  out << "\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << values(i, j);
    out << "\n";
  }
}

}  // namespace

TEST_CASE("detect finds the implant and writes fixed filenames") {
  TempDir dir("detect");
  const auto f = write_scene(dir, 21);
  REQUIRE(run_cli({"detect", "--cube", dir / "cube.hdr", "--target-lib", dir / "lib.csv", "--target", "N1",
                   "--threshold", "0.3", "--out", dir / "out"}) == 0);
  for (const char* name : {"scores.bin", "scores.json", "rois.json"}) CHECK(fs::exists(dir / (std::string("out/") + name)));
  const auto rois = read_roi_pixels(dir / "out/rois.json");
  REQUIRE_FALSE(rois.empty());
  bool hit = false;
  for (const auto& p : rois.front()) {
    hit = hit || std::find(f.scene.implant.begin(), f.scene.implant.end(), p) != f.scene.implant.end();
  }
  CHECK(hit);
  const DetectionMap map = read_score_map(dir / "out/scores.bin", dir / "out/scores.json");
  CHECK(map.rows == 32);

  // Same flags, different thread count: byte-identical outputs.
  REQUIRE(run_cli({"--threads", "3", "detect", "--cube", dir / "cube.hdr", "--target-lib", dir / "lib.csv", "--target",
                   "N1", "--threshold", "0.3", "--out", dir / "again"}) == 0);
  for (const char* name : {"scores.bin", "scores.json", "rois.json"}) {
    CHECK(read_text_file(dir / (std::string("out/") + name)) == read_text_file(dir / (std::string("again/") + name)));
  }
}

TEST_CASE("detect on a noise-only cube with a high threshold finds nothing") {
  TempDir dir("noise");
  Rng rng(4);
  const GridPtr g = testing::synthetic_grid(20);
  std::vector<double> data(16 * 16 * 20);
  for (auto& v : data) v = 0.3 + rng.normal(0.0, 0.01);
  write_envi(ImageCube(16, 16, g, data), dir / "n.hdr", dir / "n.img", {.data_type = 5});
  std::vector<Spectrum> lib{Spectrum("t", g, Eigen::VectorXd::LinSpaced(20, 0.2, 0.4), {"X"})};
  write_library_csv(SpectralLibrary(g, lib), dir / "t.csv");
  REQUIRE(run_cli({"detect", "--cube", dir / "n.hdr", "--target-lib", dir / "t.csv", "--target", "t", "--threshold",
                   "0.999", "--out", dir / "out"}) == 0);
  CHECK(load_json(dir / "out/rois.json")["rois"].empty());
}

TEST_CASE("detect input errors exit with 2") {
  TempDir dir("detect_err");
  write_scene(dir, 22);
  CHECK(run_cli({"detect", "--cube", dir / "cube.hdr", "--target-lib", dir / "lib.csv", "--target", "nope", "--out",
                 dir / "o"}) == 2);
  CHECK(run_cli({"detect", "--cube", dir / "cube.hdr", "--target-lib", dir / "lib.csv", "--target", "N1", "--threshold",
                 "1.5", "--out", dir / "o"}) == 2);
  CHECK(run_cli({"detect", "--cube", dir / "missing.hdr", "--target-lib", dir / "lib.csv", "--target", "N1", "--out",
                 dir / "o"}) == 2);
  CHECK(run_cli({"detect", "--bogus"}) == 2);
  // Target library on another grid needs --resample.
  const GridPtr other = testing::synthetic_grid(50);
  std::vector<Spectrum> lib{Spectrum("N1", other, Eigen::VectorXd::LinSpaced(50, 0.2, 0.4), {"X"})};
  write_library_csv(SpectralLibrary(other, lib), dir / "coarse.csv");
  CHECK(run_cli({"detect", "--cube", dir / "cube.hdr", "--target-lib", dir / "coarse.csv", "--target", "N1", "--out",
                 dir / "o"}) == 2);
  CHECK(run_cli({"detect", "--cube", dir / "cube.hdr", "--target-lib", dir / "coarse.csv", "--target", "N1",
                 "--resample", "--out", dir / "o"}) == 0);
}

TEST_CASE("identify a pure library spectrum") {
  TempDir dir("pure");
  const auto lib = testing::make_library(31);
  write_library_csv(lib.library, dir / "lib.csv");
  write_hierarchy_json(lib.library, dir / "lib.json");
  const Spectrum copy = lib.library.at("G2").renamed("pixel", {});
  write_spectrum_csv(copy, dir / "px.csv");
  REQUIRE(run_cli({"identify", "--spectrum", dir / "px.csv", "--library", dir / "lib.csv", "--hierarchy",
                   dir / "lib.json", "--out", dir / "out"}) == 0);
  const auto doc = read_results_json(dir / "out/results.json");
  const TreeNode* green = nullptr;
  for (const auto& c : doc.tree.children) {
    for (const auto& cc : c.children) {
      for (const auto& ccc : cc.children) {
        if (ccc.name == "Green") green = &ccc;
      }
    }
  }
  REQUIRE(green != nullptr);
  CHECK(green->probability > 0.999);
  CHECK(fs::exists(dir / "out/tree.dot"));
}

TEST_CASE("identify a nylon pixel from a small library") {
  TempDir dir("nylon");
  Rng rng(5);
  const GridPtr g = testing::synthetic_grid(60);
  const auto n = testing::smooth_spectrum(rng, *g);
  const auto p = testing::smooth_spectrum(rng, *g);
  const auto c = testing::smooth_spectrum(rng, *g);
  const auto v = testing::smooth_spectrum(rng, *g);
  std::vector<Spectrum> spectra{Spectrum("N1", g, testing::perturb(rng, n, *g, 0.02), {"Fabric", "Polymer", "Nylon"}),
                                Spectrum("N2", g, testing::perturb(rng, n, *g, 0.02), {"Fabric", "Polymer", "Nylon"}),
                                Spectrum("P1", g, testing::perturb(rng, p, *g, 0.02), {"Fabric", "Polymer", "Polyester"}),
                                Spectrum("P2", g, testing::perturb(rng, p, *g, 0.02), {"Fabric", "Polymer", "Polyester"}),
                                Spectrum("C1", g, testing::perturb(rng, c, *g, 0.02), {"Fabric", "Cotton"}),
                                Spectrum("C2", g, testing::perturb(rng, c, *g, 0.02), {"Fabric", "Cotton"}),
                                Spectrum("V1", g, testing::perturb(rng, v, *g, 0.02), {"Vegetation"}),
                                Spectrum("V2", g, testing::perturb(rng, v, *g, 0.02), {"Vegetation"})};
  const SpectralLibrary lib(g, spectra);
  write_library_csv(lib, dir / "lib.csv");
  write_hierarchy_json(lib, dir / "lib.json");
  Eigen::VectorXd px = lib.at("N1").values();
  for (Eigen::Index i = 0; i < px.size(); ++i) px[i] += rng.normal(0.0, 0.001);
  write_spectrum_csv(Spectrum("px", g, px), dir / "px.csv");

  for (const std::string strategy : {"occam", "exhaustive", "mc3"}) {
    REQUIRE(run_cli({"--seed", "3", "identify", "--spectrum", dir / "px.csv", "--library", dir / "lib.csv",
                     "--hierarchy", dir / "lib.json", "--strategy", strategy, "--iterations", "5000", "--out",
                     dir / strategy}) == 0);
  }
  const auto occam = load_json(dir / "occam/results.json");
  const auto exhaustive = load_json(dir / "exhaustive/results.json");
  CHECK(occam["search"]["strategy"] == "occam");
  IdentificationTree tree{tree_from_json(occam["tree"])};
  CHECK(tree.root.children.back().name == "Fabric");
  const auto* fabric = &tree.root.children.back();
  double nylon = -1.0;
  for (const auto& c : fabric->children) {
    for (const auto& cc : c.children) {
      if (cc.name == "Nylon") nylon = cc.probability;
    }
  }
  CHECK(nylon >= 0.95);

  // Exhaustive and occam trees agree on this instance.
  const std::function<void(const nlohmann::json&, const nlohmann::json&)> same = [&](const auto& a, const auto& b) {
    CHECK(a["name"] == b["name"]);
    CHECK(a["p"].template get<double>() == doctest::Approx(b["p"].template get<double>()).epsilon(1e-10));
    REQUIRE(a["children"].size() == b["children"].size());
    for (std::size_t i = 0; i < a["children"].size(); ++i) same(a["children"][i], b["children"][i]);
  };
  same(occam["tree"], exhaustive["tree"]);
}

TEST_CASE("identify with background removal from a detected ROI") {
  TempDir dir("bkgr");
  const auto f = write_scene(dir, 23);
  REQUIRE(run_cli({"detect", "--cube", dir / "cube.hdr", "--target-lib", dir / "lib.csv", "--target", "N1",
                   "--threshold", "0.3", "--out", dir / "det"}) == 0);
  REQUIRE(run_cli({"identify", "--cube", dir / "cube.hdr", "--roi", dir / "det/rois.json", "--background-removal",
                   "--target", "N1", "--library", dir / "lib.csv", "--hierarchy", dir / "lib.json", "--out",
                   dir / "id"}) == 0);
  const auto doc = load_json(dir / "id/results.json");
  REQUIRE(doc.contains("background_removal"));
  CHECK(doc["background_removal"]["background_pixels"].size() == 24);
  CHECK(doc["background_removal"]["target_abundance"].get<double>() > 0.1);

  REQUIRE(run_cli({"identify", "--cube", dir / "cube.hdr", "--roi", dir / "det/rois.json", "--background-removal",
                   "--backgrounds", "coords", "--background-coords", "0,0;0,1;31,31;5,20;20,5", "--target", "N1",
                   "--library", dir / "lib.csv", "--hierarchy", dir / "lib.json", "--out", dir / "id2"}) == 0);
  CHECK(load_json(dir / "id2/results.json")["background_removal"]["background_pixels"].size() == 5);

  CHECK(run_cli({"identify", "--cube", dir / "cube.hdr", "--roi", dir / "det/rois.json", "--roi-index", "99",
                 "--library", dir / "lib.csv", "--out", dir / "id3"}) == 2);
  CHECK(run_cli({"identify", "--cube", dir / "cube.hdr", "--roi", dir / "det/rois.json", "--background-removal",
                 "--backgrounds", "coords", "--background-coords", "0,99", "--target", "N1", "--library",
                 dir / "lib.csv", "--out", dir / "id4"}) == 2);
  (void)f;
}

TEST_CASE("identify input and search errors map to exit codes") {
  TempDir dir("id_err");
  const auto lib = testing::make_library(41);
  write_library_csv(lib.library, dir / "lib.csv");
  write_spectrum_csv(lib.library.at("N1").renamed("px", {}), dir / "px.csv");
  CHECK(run_cli({"identify", "--library", dir / "lib.csv", "--out", dir / "o"}) == 2);
  CHECK(run_cli({"identify", "--spectrum", dir / "px.csv", "--library", dir / "lib.csv", "--window-c", "0.5",
                 "--out", dir / "o"}) == 2);
  CHECK(run_cli({"identify", "--spectrum", dir / "px.csv", "--library", dir / "lib.csv", "--strategy", "greedy",
                 "--out", dir / "o"}) == 2);
  // 40 candidates up to size 8 exceeds the enumeration cap: a search error.
  CHECK(run_cli({"identify", "--spectrum", dir / "px.csv", "--library", dir / "lib.csv", "--strategy", "exhaustive",
                 "--max-size", "8", "--out", dir / "o"}) == 3);
}

TEST_CASE("bma-table: a duplicated response column is always included") {
  TempDir dir("dup");
  Rng rng(6);
  Eigen::MatrixXd v(60, 5);
  for (Eigen::Index i = 0; i < 60; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) v(i, j) = rng.normal();
  }
  v.col(4) = v.col(0) * 0.5 + v.col(1);
  for (Eigen::Index i = 0; i < 60; ++i) v(i, 4) += rng.normal(0.0, 0.3);
  Eigen::MatrixXd w(60, 6);
  w << v, v.col(4);
  write_table(dir / "t.csv", w, {"a", "b", "c", "d", "y", "copy"});
  REQUIRE(run_cli({"bma-table", "--csv", dir / "t.csv", "--response", "y", "--out", dir / "out"}) == 0);
  const auto doc = load_json(dir / "out/results.json");
  CHECK(doc["inclusion"]["copy"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  const std::string csv = read_text_file(dir / "out/inclusion.csv");
  CHECK(csv.rfind("name,pip,pip_percent,averaged_coefficient\n", 0) == 0);
  CHECK(csv.find("copy,1,100.0,") != std::string::npos);
}

TEST_CASE("bma-table: pure noise gives low inclusion probabilities") {
  TempDir dir("null");
  Rng rng(7);
  Eigen::MatrixXd v(200, 6);
  for (Eigen::Index i = 0; i < 200; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) v(i, j) = rng.normal();
  }
  write_table(dir / "t.csv", v, {"x1", "x2", "x3", "x4", "x5", "y"});
  for (const std::string strategy : {"occam", "mc3"}) {
    REQUIRE(run_cli({"bma-table", "--csv", dir / "t.csv", "--response", "y", "--strategy", strategy, "--out",
                     dir / strategy}) == 0);
    const auto doc = load_json(dir / (strategy + "/results.json"));
    for (const auto& [name, p] : doc["inclusion"].items()) CHECK(p.get<double>() < 0.5);
  }
}

TEST_CASE("bma-table groups and errors") {
  TempDir dir("groups");
  std::ofstream(dir / "t.csv") << "a,b,y\n1,2,3\n2,1,4\n3,5,2\n4,3,6\n5,4,4\n6,7,8\n";
  REQUIRE(run_cli({"bma-table", "--csv", dir / "t.csv", "--response", "y", "--group", "AB=a,b", "--out",
                   dir / "out"}) == 0);
  const auto tree = load_json(dir / "out/results.json")["tree"];
  REQUIRE(tree["children"].size() == 1);
  CHECK(tree["children"][0]["name"] == "AB");
  CHECK(run_cli({"bma-table", "--csv", dir / "t.csv", "--response", "zz", "--out", dir / "o"}) == 2);
  CHECK(run_cli({"bma-table", "--csv", dir / "t.csv", "--response", "y", "--group", "bad", "--out", dir / "o"}) == 2);
  CHECK(run_cli({"bma-table", "--csv", dir / "t.csv", "--response", "y", "--group", "G=a,q", "--out", dir / "o"}) == 2);
  std::ofstream(dir / "bad.csv") << "a,y\n1,2\nx,3\n";
  CHECK(run_cli({"bma-table", "--csv", dir / "bad.csv", "--response", "y", "--out", dir / "o"}) == 2);
  CHECK(run_cli({"bma-table", "--csv", dir / "t.csv", "--response", "y"}) == 2);
}

TEST_CASE("mc3 runs are reproducible from the seed") {
  TempDir dir("seed");
  Rng rng(8);
  Eigen::MatrixXd v(50, 7);
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) v(i, j) = rng.normal();
    v(i, 6) = v(i, 0) - 0.5 * v(i, 2) + rng.normal();
  }
  write_table(dir / "t.csv", v, {"a", "b", "c", "d", "e", "f", "y"});
  for (const std::string out : {"r1", "r2"}) {
    REQUIRE(run_cli({"--seed", "99", "bma-table", "--csv", dir / "t.csv", "--response", "y", "--strategy", "mc3",
                     "--iterations", "3000", "--out", dir / out}) == 0);
  }
  CHECK(read_text_file(dir / "r1/results.json") == read_text_file(dir / "r2/results.json"));
  CHECK(read_text_file(dir / "r1/inclusion.csv") == read_text_file(dir / "r2/inclusion.csv"));
}

TEST_CASE("argument helpers") {
  CHECK(cli::parse_coords("1,2; 3,4") == std::vector<PixelCoord>{{1, 2}, {3, 4}});
  CHECK_THROWS(cli::parse_coords("1"));
  CHECK_THROWS(cli::parse_coords("-1,2"));
  const auto g = cli::parse_group("Police = Po1, Po2");
  CHECK(g.first == "Police");
  CHECK(g.second == std::vector<std::string>{"Po1", "Po2"});
}
