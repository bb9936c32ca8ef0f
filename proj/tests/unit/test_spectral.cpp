#include <algorithm>
#include <set>

#include <doctest.h>

#include "hbma/errors.hpp"
#include "hbma/hierarchy.hpp"
#include "hbma/spectral.hpp"

using namespace hbma;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("band grid validation") {
  CHECK_THROWS_AS(make_grid({}), InputError);
  CHECK_THROWS_AS(make_grid({0.5, 0.5}), InputError);
  CHECK_THROWS_AS(make_grid({0.6, 0.5}), InputError);
  CHECK_THROWS_AS(make_grid({-0.1, 0.5}), InputError);
  const BandGrid nm = BandGrid::from_nanometers({400.0, 500.0});
  CHECK(nm[0] == doctest::Approx(0.4));
  CHECK(nm[1] == doctest::Approx(0.5));
  CHECK(same_grid(make_grid({0.4, 0.5}), std::make_shared<const BandGrid>(nm)));
}

TEST_CASE("spectrum length must match its grid") {
  const GridPtr g = make_grid({0.4, 0.5, 0.6});
  CHECK_THROWS_AS(Spectrum("x", g, vec({1, 2})), InputError);
  CHECK_THROWS_AS(Spectrum("x", g, vec({1, 2, 3})).with_valid_mask({1, 1}), InputError);
  const Spectrum s = Spectrum("x", g, vec({1, 2, 3})).with_valid_mask({1, 0, 1});
  CHECK_FALSE(s.valid(1));
  CHECK_FALSE(s.all_valid());
}

TEST_CASE("resample reproduces a linear function exactly") {
  const GridPtr src = make_grid({0.4, 0.8, 1.2, 1.6, 2.0});
  Eigen::VectorXd v(5);
  for (int i = 0; i < 5; ++i) v[i] = 0.1 + 0.3 * (*src)[static_cast<std::size_t>(i)];
  const Spectrum s("lin", src, v);
  const GridPtr dst = make_grid({0.3, 0.5, 1.0, 1.55, 2.0, 2.2});
  const Spectrum r = resample(s, dst);
  CHECK_FALSE(r.valid(0));
  CHECK(r.values()[0] == 0.0);
  for (std::size_t b = 1; b <= 4; ++b) {
    CHECK(r.valid(b));
    CHECK(r.values()[static_cast<Eigen::Index>(b)] == doctest::Approx(0.1 + 0.3 * (*dst)[b]).epsilon(1e-12));
  }
  CHECK_FALSE(r.valid(5));
}

TEST_CASE("resample onto the same grid is the identity") {
  const GridPtr g = make_grid({0.4, 0.5, 0.6});
  const Spectrum s("x", g, vec({0.2, 0.7, 0.1}));
  const Spectrum r = resample(s, make_grid({0.4, 0.5, 0.6}));
  CHECK(r.values().isApprox(s.values()));
  CHECK(r.all_valid());
}

TEST_CASE("resample propagates invalid source bands") {
  const GridPtr g = make_grid({0.4, 0.5, 0.6, 0.7});
  const Spectrum s = Spectrum("x", g, vec({0.1, 0.2, 0.3, 0.4})).with_valid_mask({1, 1, 0, 1});
  const Spectrum r = resample(s, make_grid({0.45, 0.55, 0.65}));
  CHECK(r.valid(0));
  CHECK_FALSE(r.valid(1));
  CHECK_FALSE(r.valid(2));
}

TEST_CASE("resample between disjoint ranges fails") {
  const Spectrum s("x", make_grid({0.4, 0.5}), vec({0.1, 0.2}));
  CHECK_THROWS_AS(resample(s, make_grid({1.0, 1.1})), AlignmentError);
}

TEST_CASE("mix is linear and seeded") {
  const GridPtr g = make_grid({0.4, 0.5, 0.6});
  const Spectrum a("a", g, vec({0.1, 0.2, 0.3}));
  const Spectrum b("b", g, vec({0.5, 0.5, 0.0}));
  const std::vector<MixComponent> parts{{&a, 0.4}, {&b, 0.6}};
  const Spectrum m = mix(parts, 0.0, 1);
  CHECK(m.values().isApprox(vec({0.34, 0.38, 0.12}), 1e-14));
  const Spectrum n1 = mix(parts, 0.01, 42);
  const Spectrum n2 = mix(parts, 0.01, 42);
  const Spectrum n3 = mix(parts, 0.01, 43);
  CHECK(n1.values() == n2.values());
  CHECK(n1.values() != n3.values());
  const Spectrum c("c", make_grid({0.4, 0.5, 0.7}), vec({1, 1, 1}));
  const std::vector<MixComponent> bad{{&a, 0.5}, {&c, 0.5}};
  CHECK_THROWS_AS(mix(bad, 0.0, 1), AlignmentError);
}

TEST_CASE("pixel extraction and averaging") {
  const GridPtr g = make_grid({0.4, 0.5});
  const ImageCube cube(2, 2, g, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(extract_pixel(cube, 1, 0).values() == vec({5, 6}));
  const std::vector<PixelCoord> px{{0, 0}, {1, 1}};
  CHECK(average_pixels(cube, px).values().isApprox(vec({4, 5})));
  CHECK_THROWS_AS(extract_pixel(cube, 2, 0), BoundsError);
  const std::vector<PixelCoord> out{{0, 5}};
  CHECK_THROWS_AS(average_pixels(cube, out), BoundsError);
  CHECK_THROWS_AS(average_pixels(cube, {}), InputError);
  CHECK_THROWS_AS(ImageCube(2, 2, g, {1, 2, 3}), InputError);
}

TEST_CASE("library rejects duplicates and mismatched grids") {
  const GridPtr g = make_grid({0.4, 0.5});
  std::vector<Spectrum> dup{Spectrum("a", g, vec({1, 2}), {"X"}), Spectrum("a", g, vec({1, 2}), {"Y"})};
  CHECK_THROWS_AS(SpectralLibrary(g, dup), InputError);
  std::vector<Spectrum> off{Spectrum("a", make_grid({0.4, 0.6}), vec({1, 2}), {"X"})};
  CHECK_THROWS_AS(SpectralLibrary(g, off), AlignmentError);
}

TEST_CASE("hierarchy node members are the union of direct members and children") {
  const ClassHierarchy h({"N1", "N2", "P1", "C1", "F0", "V1"},
                         {{"Fabric", "Polymer", "Nylon"},
                          {"Fabric", "Polymer", "Nylon"},
                          {"Fabric", "Polymer", "Polyester"},
                          {"Fabric", "Cotton"},
                          {"Fabric"},
                          {"Vegetation"}});
  for (ClassHierarchy::NodeId id = 0; id < h.size(); ++id) {
    const auto& node = h.node(id);
    std::set<std::size_t> expected(node.direct_members.begin(), node.direct_members.end());
    for (auto c : node.children) expected.insert(h.node(c).members.begin(), h.node(c).members.end());
    CHECK(std::set<std::size_t>(node.members.begin(), node.members.end()) == expected);
    CHECK(std::is_sorted(node.members.begin(), node.members.end()));
  }
  CHECK(h.root().members.size() == 6);
  CHECK(h.members_of(*h.find_path("Fabric/Polymer")) == std::vector<std::string>{"N1", "N2", "P1"});
  CHECK(h.members_of(h.resolve("Fabric")).size() == 5);
  CHECK(h.path_of(h.resolve("Nylon")) == "Fabric/Polymer/Nylon");
  CHECK(h.find_path("Library") == ClassHierarchy::root_id);
  CHECK_FALSE(h.find_path("Fabric/Nylon").has_value());
  CHECK_THROWS_AS(h.resolve("Metal"), InputError);
}

TEST_CASE("hierarchy validation and ambiguous names") {
  CHECK_THROWS_AS(ClassHierarchy({"a", "a"}, {{"X"}, {"Y"}}), InputError);
  CHECK_THROWS_AS(ClassHierarchy({"a"}, {{}}), InputError);
  CHECK_THROWS_AS(ClassHierarchy({"a"}, {{"Library", "X"}}), InputError);
  const ClassHierarchy h({"a", "b"}, {{"Vehicle", "Green"}, {"Fabric", "Green"}});
  CHECK_THROWS_AS(h.find_name("Green"), InputError);
  CHECK_THROWS_AS(h.resolve("Green"), InputError);
  CHECK(h.resolve("Vehicle/Green") != h.resolve("Fabric/Green"));
}
