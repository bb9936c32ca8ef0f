#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "hbma/aggregate.hpp"
#include "hbma/errors.hpp"
#include "hbma/search.hpp"
#include "synthetic.hpp"

using namespace hbma;

namespace {

std::set<std::vector<std::size_t>> keys(const ModelSet& s) {
  std::set<std::vector<std::size_t>> out;
  for (const auto& m : s.models) out.insert(m.regressors);
  return out;
}

SearchConfig config_with(SearchStrategy strategy, std::size_t max_size) {
  SearchConfig c;
  c.strategy = strategy;
  c.max_size = max_size;
  return c;
}

}  // namespace

TEST_CASE("subset counts") {
  CHECK(subset_count(4, 2) == 10);
  CHECK(subset_count(8, 3) == 92);
  CHECK(subset_count(3, 10) == 7);
  CHECK(subset_count(200, 4) == 200 + 19900 + 1313400 + 64684950);
}

TEST_CASE("exhaustive search enumerates every subset") {
  SUBCASE("p = 4, max 2") {
    const auto s = exhaustive_search(testing::random_instance(1, 4, 20), config_with(SearchStrategy::exhaustive, 2));
    CHECK(s.size() == 10);
    CHECK(s.metadata.fitted == 10);
  }
  SUBCASE("p = 8, max 3") {
    const auto s = exhaustive_search(testing::random_instance(2, 8, 20), config_with(SearchStrategy::exhaustive, 3));
    CHECK(s.size() == 92);
  }
}

TEST_CASE("exhaustive search refuses to exceed the enumeration cap") {
  SearchConfig c = config_with(SearchStrategy::exhaustive, 3);
  c.enumeration_cap = 50;
  try {
    exhaustive_search(testing::random_instance(2, 8, 20), c);
    FAIL("expected SearchError");
  } catch (const SearchError& e) {
    CHECK(std::string(e.what()).find("92") != std::string::npos);
  }
}

TEST_CASE("models are ordered by BIC then by names") {
  const auto s = exhaustive_search(testing::random_instance(3, 7, 25), config_with(SearchStrategy::exhaustive, 3));
  CHECK(std::is_sorted(s.models.begin(), s.models.end(), model_order));
  CHECK(s.best_bic == s.models.front().bic);
  RegressionModel a;
  a.names = {"b"};
  RegressionModel b;
  b.names = {"a", "c"};
  CHECK(model_order(b, a));
}

TEST_CASE("occam window property and containment in exhaustive") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RegressionProblem p = testing::random_instance(100 + seed, 8, 30);
    const auto occam = occam_search(p, config_with(SearchStrategy::occam, 3));
    const auto all = exhaustive_search(p, config_with(SearchStrategy::exhaustive, 3));
    for (const auto& m : occam.models) CHECK(m.bic <= occam.best_bic + 2.0 * std::log(20.0) + 1e-9);
    const auto k_all = keys(all);
    for (const auto& k : keys(occam)) CHECK(k_all.count(k) == 1);
    CHECK(occam.best_bic >= all.best_bic - 1e-9);
  }
}

TEST_CASE("occam equals the filtered exhaustive set on a strong-signal instance") {
  // Independent candidates and a clear two-column signal: every window model
  // is reachable through a surviving parent.
  Rng rng(77);
  RegressionProblem p;
  p.candidates.resize(40, 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    for (Eigen::Index i = 0; i < 40; ++i) p.candidates(i, j) = rng.normal();
    p.names.push_back("x" + std::to_string(j));
  }
  p.response = 2.0 * p.candidates.col(1) - 1.5 * p.candidates.col(4);
  for (Eigen::Index i = 0; i < 40; ++i) p.response[i] += rng.normal(0.0, 0.5);
  const auto occam = occam_search(p, config_with(SearchStrategy::occam, 3));
  const auto filtered = apply_window(exhaustive_search(p, config_with(SearchStrategy::exhaustive, 3)), 20.0);
  CHECK(keys(occam) == keys(filtered));
  const auto a = normalize(occam);
  const auto b = normalize(filtered);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.probabilities[i] == doctest::Approx(b.probabilities[i]).epsilon(1e-10));
}

TEST_CASE("orthonormal columns with an exact response: the razor leaves the singleton") {
  RegressionProblem p;
  p.candidates = Eigen::MatrixXd::Zero(10, 2);
  p.candidates(0, 0) = 1.0;
  p.candidates(1, 1) = 1.0;
  p.names = {"e0", "e1"};
  p.response = p.candidates.col(0);
  // {e0, e1} also fits exactly and only pays ln n more, so without the razor
  // the singleton leads but does not dominate.
  const auto plain = normalize(occam_search(p, config_with(SearchStrategy::occam, 2)));
  REQUIRE(plain.size() >= 1);
  CHECK(plain.models.models.front().names == std::vector<std::string>{"e0"});
  CHECK(plain.probabilities.front() > 0.5);
  SearchConfig razor = config_with(SearchStrategy::occam, 2);
  razor.submodel_exclusion = true;
  const auto post = normalize(occam_search(p, razor));
  REQUIRE(post.size() == 1);
  CHECK(post.models.models.front().names == std::vector<std::string>{"e0"});
  CHECK(post.probabilities.front() == 1.0);
}

TEST_CASE("occam level statistics and cap") {
  const RegressionProblem p = testing::random_instance(5, 10, 30, 0.2);
  SearchConfig c = config_with(SearchStrategy::occam, 3);
  c.window_c = 1e6;
  c.level_cap = 5;
  const auto s = occam_search(p, c);
  REQUIRE_FALSE(s.metadata.levels.empty());
  CHECK(s.metadata.levels.front().candidates == 10);
  CHECK(s.metadata.levels.front().cap_hit);
  for (const auto& l : s.metadata.levels) CHECK(l.survivors <= 5);
}

TEST_CASE("sub-model exclusion drops dominated supermodels") {
  const RegressionProblem p = testing::random_instance(6, 7, 30);
  SearchConfig c = config_with(SearchStrategy::occam, 3);
  const auto plain = occam_search(p, c);
  c.submodel_exclusion = true;
  const auto strict = occam_search(p, c);
  CHECK(strict.size() + strict.metadata.excluded_by_submodel == plain.size());
  for (const auto& m : strict.models) {
    for (const auto& other : strict.models) {
      if (other.size() >= m.size()) continue;
      const bool subset = std::includes(m.regressors.begin(), m.regressors.end(), other.regressors.begin(),
                                        other.regressors.end());
      CHECK_FALSE((subset && other.bic < m.bic));
    }
  }
}

TEST_CASE("mc3 with a single candidate stays on it") {
  RegressionProblem p = testing::random_instance(7, 1, 20);
  const auto s = mc3_search(p, config_with(SearchStrategy::mc3, 4));
  REQUIRE(s.size() == 1);
  CHECK(normalize(s).probabilities.front() == 1.0);
}

TEST_CASE("mc3 inclusion probabilities approach the exhaustive ones") {
  const RegressionProblem p = testing::random_instance(8, 6, 30, 0.05);
  SearchConfig c = config_with(SearchStrategy::mc3, 2);
  c.mc3_iterations = 20000;
  const auto mc = averaged_coefficients(normalize(mc3_search(p, c)));
  const auto ex = averaged_coefficients(normalize(exhaustive_search(p, c)));
  for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(mc.inclusion[k] - ex.inclusion[k]) <= 0.05);
}

TEST_CASE("mc3 is deterministic for a seed and independent of threads") {
  const RegressionProblem p = testing::random_instance(9, 9, 30, 0.05);
  SearchConfig c = config_with(SearchStrategy::mc3, 3);
  c.mc3_iterations = 4000;
  c.mc3_chains = 3;
  c.seed = 17;
  const auto a = mc3_search(p, c);
  c.threads = 3;
  const auto b = mc3_search(p, c);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.models[i].regressors == b.models[i].regressors);
    CHECK(a.models[i].bic == b.models[i].bic);
  }
  CHECK(a.metadata.visit_counts == b.metadata.visit_counts);
  CHECK(a.metadata.accepted == b.metadata.accepted);
  c.seed = 18;
  const auto other = mc3_search(p, c);
  CHECK(other.metadata.visit_counts != a.metadata.visit_counts);
}

TEST_CASE("exhaustive and occam are independent of the thread count") {
  const RegressionProblem p = testing::random_instance(10, 9, 30);
  for (auto strategy : {SearchStrategy::exhaustive, SearchStrategy::occam}) {
    SearchConfig c = config_with(strategy, 3);
    const auto a = search(p, c);
    c.threads = 4;
    const auto b = search(p, c);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.models[i].regressors == b.models[i].regressors);
      CHECK(a.models[i].bic == b.models[i].bic);
    }
  }
}

TEST_CASE("config validation and strategy names") {
  SearchConfig c;
  c.max_size = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = SearchConfig{};
  c.window_c = 1.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  CHECK(parse_strategy("mc3") == SearchStrategy::mc3);
  CHECK(to_string(SearchStrategy::occam) == "occam");
  CHECK_THROWS_AS(parse_strategy("greedy"), InputError);
  CHECK(SearchConfig{}.window() == doctest::Approx(2.0 * std::log(20.0)));
}

TEST_CASE("max size is capped by the candidate count") {
  const auto s = exhaustive_search(testing::random_instance(11, 3, 20), config_with(SearchStrategy::exhaustive, 10));
  CHECK(s.size() == 7);
}

TEST_CASE("apply_window keeps models within 2 ln C") {
  const auto all = exhaustive_search(testing::random_instance(12, 6, 25), config_with(SearchStrategy::exhaustive, 3));
  const auto w = apply_window(all, 20.0);
  for (const auto& m : w.models) CHECK(m.bic <= all.best_bic + 2.0 * std::log(20.0));
  std::size_t inside = 0;
  for (const auto& m : all.models) inside += m.bic <= all.best_bic + 2.0 * std::log(20.0);
  CHECK(w.size() == inside);
}
