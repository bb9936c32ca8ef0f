#include "hbma/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "hbma/errors.hpp"
#include "hbma/parallel.hpp"
#include "hbma/random.hpp"

namespace hbma {

namespace {

constexpr const char* kModule = "model-search";

using Key = std::vector<std::size_t>;

struct KeyHash {
  std::size_t operator()(const Key& key) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (std::size_t v : key) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

Key with_added(const Key& key, std::size_t j) {
  Key out = key;
  out.insert(std::lower_bound(out.begin(), out.end(), j), j);
  return out;
}

std::size_t effective_max_size(const RegressionProblem& problem, const SearchConfig& config) {
  const std::size_t limit = std::min(config.max_size, problem.candidate_count());
  const std::size_t params = limit + (problem.intercept ? 1 : 0);
  if (params >= problem.n_obs()) {
    throw InputError(kModule, "max model size " + std::to_string(limit) + " needs more than " +
                                  std::to_string(problem.n_obs()) + " observations");
  }
  return limit;
}

void prepare(const RegressionProblem& problem, const SearchConfig& config) {
  config.validate();
  problem.validate();
  if (problem.candidate_count() == 0) throw SearchError(kModule, "candidate library is empty");
}

ModelSet finish(std::vector<RegressionModel> models, const RegressionProblem& problem, SearchMetadata meta) {
  ModelSet set;
  set.models = std::move(models);
  set.regressor_names = problem.names;
  set.metadata = std::move(meta);
  canonicalize(set);
  return set;
}

// Depth-first enumeration of every subset whose smallest index is `first`.
void enumerate_from(const RegressionProblem& problem, const LeastSquaresFit& parent, std::size_t next,
                    std::size_t remaining, std::vector<RegressionModel>& out, std::size_t& flagged) {
  for (std::size_t j = next; j < problem.candidate_count(); ++j) {
    LeastSquaresFit child = parent.extended(problem.candidates.col(static_cast<Eigen::Index>(j)), j);
    RegressionModel model = child.model(problem.names);
    if (model.condition_flag) {
      ++flagged;
    } else {
      out.push_back(std::move(model));
    }
    if (remaining > 1) enumerate_from(problem, child, j + 1, remaining - 1, out, flagged);
  }
}

}  // namespace

std::string to_string(SearchStrategy strategy) {
  switch (strategy) {
    case SearchStrategy::exhaustive: return "exhaustive";
    case SearchStrategy::occam: return "occam";
    case SearchStrategy::mc3: return "mc3";
  }
  return "unknown";
}

SearchStrategy parse_strategy(const std::string& text) {
  if (text == "exhaustive") return SearchStrategy::exhaustive;
  if (text == "occam") return SearchStrategy::occam;
  if (text == "mc3") return SearchStrategy::mc3;
  throw InputError(kModule, "unknown strategy '" + text + "' (expected exhaustive, occam or mc3)");
}

void SearchConfig::validate() const {
  if (max_size < 1) throw InputError(kModule, "max_size must be at least 1");
  if (!(window_c > 1.0) || !std::isfinite(window_c)) throw InputError(kModule, "window ratio C must be > 1");
  if (mc3_iterations < 1) throw InputError(kModule, "mc3_iterations must be at least 1");
  if (mc3_chains < 1) throw InputError(kModule, "mc3_chains must be at least 1");
  if (level_cap < 1) throw InputError(kModule, "level_cap must be at least 1");
  if (prior.kind == ModelPrior::Kind::per_size) {
    for (double w : prior.size_weights) {
      if (!std::isfinite(w) || w <= 0.0) throw InputError(kModule, "prior weights must be positive and finite");
    }
  }
}

double SearchConfig::window() const { return 2.0 * std::log(window_c); }

bool model_order(const RegressionModel& a, const RegressionModel& b) {
  if (a.bic != b.bic) return a.bic < b.bic;
  return a.names < b.names;
}

void canonicalize(ModelSet& set) {
  const bool has_visits = set.metadata.visit_counts.size() == set.models.size();
  std::vector<std::size_t> order(set.models.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return model_order(set.models[a], set.models[b]); });

  std::unordered_set<Key, KeyHash> seen;
  std::vector<RegressionModel> kept;
  std::vector<std::size_t> visits;
  for (std::size_t i : order) {
    if (!seen.insert(set.models[i].regressors).second) continue;
    kept.push_back(std::move(set.models[i]));
    if (has_visits) visits.push_back(set.metadata.visit_counts[i]);
  }
  set.models = std::move(kept);
  set.metadata.visit_counts = std::move(visits);
  set.best_bic = set.models.empty() ? std::numeric_limits<double>::infinity() : set.models.front().bic;
}

ModelSet apply_window(const ModelSet& set, double window_c) {
  if (!(window_c > 1.0)) throw InputError(kModule, "window ratio C must be > 1");
  ModelSet out;
  out.regressor_names = set.regressor_names;
  out.metadata = set.metadata;
  out.metadata.visit_counts.clear();
  if (set.empty()) return out;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : set.models) best = std::min(best, m.bic);
  const double limit = best + 2.0 * std::log(window_c);
  for (std::size_t i = 0; i < set.models.size(); ++i) {
    if (set.models[i].bic > limit) continue;
    out.models.push_back(set.models[i]);
    if (set.metadata.visit_counts.size() == set.models.size()) {
      out.metadata.visit_counts.push_back(set.metadata.visit_counts[i]);
    }
  }
  out.best_bic = best;
  return out;
}

ModelSet exclude_dominated_supermodels(const ModelSet& set, std::size_t* excluded) {
  std::unordered_map<Key, double, KeyHash> bic_of;
  for (const auto& m : set.models) bic_of.emplace(m.regressors, m.bic);

  auto dominated = [&](const RegressionModel& m) {
    const std::size_t k = m.size();
    if (k <= 1) return false;
    if (k <= 16) {
      const std::uint32_t full = (1u << k) - 1;
      Key sub;
      for (std::uint32_t mask = 1; mask < full; ++mask) {
        sub.clear();
        for (std::size_t i = 0; i < k; ++i) {
          if (mask & (1u << i)) sub.push_back(m.regressors[i]);
        }
        auto it = bic_of.find(sub);
        if (it != bic_of.end() && it->second < m.bic) return true;
      }
      return false;
    }
    for (const auto& other : set.models) {
      if (other.size() < k && other.bic < m.bic &&
          std::includes(m.regressors.begin(), m.regressors.end(), other.regressors.begin(),
                        other.regressors.end())) {
        return true;
      }
    }
    return false;
  };

  ModelSet out;
  out.regressor_names = set.regressor_names;
  out.metadata = set.metadata;
  out.metadata.visit_counts.clear();
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < set.models.size(); ++i) {
    if (dominated(set.models[i])) {
      ++dropped;
      continue;
    }
    out.models.push_back(set.models[i]);
    if (set.metadata.visit_counts.size() == set.models.size()) {
      out.metadata.visit_counts.push_back(set.metadata.visit_counts[i]);
    }
  }
  out.best_bic = out.models.empty() ? std::numeric_limits<double>::infinity() : out.models.front().bic;
  if (excluded) *excluded = dropped;
  return out;
}

std::uint64_t subset_count(std::size_t p, std::size_t max_size) {
  constexpr std::uint64_t saturate = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 0;
  std::uint64_t binom = 1;  // C(p, 0)
  for (std::size_t k = 1; k <= std::min(p, max_size); ++k) {
    // C(p, k) = C(p, k-1) * (p - k + 1) / k, computed without overflow where possible.
    const std::uint64_t num = p - k + 1;
    if (binom > saturate / num) return saturate;
    binom = binom * num / k;
    if (total > saturate - binom) return saturate;
    total += binom;
  }
  return total;
}

ModelSet exhaustive_search(const RegressionProblem& problem, const SearchConfig& config) {
  prepare(problem, config);
  const std::size_t max_size = effective_max_size(problem, config);
  const std::uint64_t count = subset_count(problem.candidate_count(), max_size);
  if (count > config.enumeration_cap) {
    throw SearchError(kModule, "exhaustive search would fit " + std::to_string(count) +
                                   " models, above the enumeration cap of " +
                                   std::to_string(config.enumeration_cap));
  }

  const std::size_t p = problem.candidate_count();
  std::vector<std::vector<RegressionModel>> branches(p);
  std::vector<std::size_t> branch_flagged(p, 0);
  const LeastSquaresFit root(problem.response, problem.intercept);
  parallel_for(p, config.threads, [&](std::size_t first) {
    LeastSquaresFit head = root.extended(problem.candidates.col(static_cast<Eigen::Index>(first)), first);
    RegressionModel model = head.model(problem.names);
    if (model.condition_flag) {
      ++branch_flagged[first];
    } else {
      branches[first].push_back(std::move(model));
    }
    if (max_size > 1) enumerate_from(problem, head, first + 1, max_size - 1, branches[first], branch_flagged[first]);
  });

  SearchMetadata meta;
  meta.strategy = SearchStrategy::exhaustive;
  meta.fitted = static_cast<std::size_t>(count);
  std::vector<RegressionModel> all;
  for (std::size_t i = 0; i < p; ++i) {
    meta.flagged += branch_flagged[i];
    std::move(branches[i].begin(), branches[i].end(), std::back_inserter(all));
  }
  return finish(std::move(all), problem, std::move(meta));
}

ModelSet occam_search(const RegressionProblem& problem, const SearchConfig& config) {
  prepare(problem, config);
  const std::size_t max_size = effective_max_size(problem, config);
  const std::size_t p = problem.candidate_count();
  const double window = config.window();

  SearchMetadata meta;
  meta.strategy = SearchStrategy::occam;

  struct Candidate {
    std::size_t parent;
    std::size_t added;
    RegressionModel model;
  };

  // Fits of the current level's survivors, used as parents of the next level.
  std::vector<LeastSquaresFit> parent_fits{LeastSquaresFit(problem.response, problem.intercept)};
  std::vector<Key> parent_keys{Key{}};
  std::vector<RegressionModel> retained;
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t size = 1; size <= max_size; ++size) {
    std::vector<std::pair<std::size_t, std::size_t>> plan;  // (parent, added)
    std::unordered_set<Key, KeyHash> planned;
    for (std::size_t s = 0; s < parent_keys.size(); ++s) {
      for (std::size_t j = 0; j < p; ++j) {
        if (std::binary_search(parent_keys[s].begin(), parent_keys[s].end(), j)) continue;
        if (planned.insert(with_added(parent_keys[s], j)).second) plan.emplace_back(s, j);
      }
    }
    if (plan.empty()) break;

    std::vector<std::optional<Candidate>> fitted(plan.size());
    parallel_for(plan.size(), config.threads, [&](std::size_t i) {
      const auto [s, j] = plan[i];
      RegressionModel model =
          parent_fits[s].extended(problem.candidates.col(static_cast<Eigen::Index>(j)), j).model(problem.names);
      if (!model.condition_flag) fitted[i] = Candidate{s, j, std::move(model)};
    });

    std::vector<Candidate> level;
    for (auto& c : fitted) {
      if (c) level.push_back(std::move(*c));
    }
    meta.fitted += plan.size();
    meta.flagged += plan.size() - level.size();
    if (size == 1 && level.empty()) {
      throw SearchError(kModule, "every single-regressor model is numerically degenerate");
    }

    for (const auto& c : level) best = std::min(best, c.model.bic);
    std::vector<Candidate> survivors;
    for (auto& c : level) {
      if (c.model.bic <= best + window) survivors.push_back(std::move(c));
    }
    std::sort(survivors.begin(), survivors.end(),
              [](const Candidate& a, const Candidate& b) { return model_order(a.model, b.model); });
    LevelStats stats{size, plan.size(), survivors.size(), false};
    if (survivors.size() > config.level_cap) {
      survivors.resize(config.level_cap);
      stats.survivors = survivors.size();
      stats.cap_hit = true;
    }
    meta.levels.push_back(stats);
    if (survivors.empty()) break;

    std::vector<LeastSquaresFit> next_fits;
    std::vector<Key> next_keys;
    next_fits.reserve(survivors.size());
    for (auto& c : survivors) {
      next_fits.push_back(
          parent_fits[c.parent].extended(problem.candidates.col(static_cast<Eigen::Index>(c.added)), c.added));
      next_keys.push_back(c.model.regressors);
      retained.push_back(std::move(c.model));
    }
    parent_fits = std::move(next_fits);
    parent_keys = std::move(next_keys);
  }

  std::vector<RegressionModel> in_window;
  for (auto& m : retained) {
    if (m.bic <= best + window) in_window.push_back(std::move(m));
  }
  ModelSet set = finish(std::move(in_window), problem, std::move(meta));
  if (config.submodel_exclusion) {
    std::size_t dropped = 0;
    set = exclude_dominated_supermodels(set, &dropped);
    set.metadata.excluded_by_submodel = dropped;
  }
  return set;
}

namespace {

struct ChainResult {
  std::map<Key, std::pair<RegressionModel, std::size_t>> visited;
  std::size_t fitted = 0;
  std::size_t flagged = 0;
  std::size_t accepted = 0;
  std::size_t proposals = 0;
};

ChainResult run_chain(const RegressionProblem& problem, const SearchConfig& config, std::size_t max_size,
                      std::uint64_t seed, const RegressionModel& start) {
  const std::size_t p = problem.candidate_count();
  ChainResult result;
  std::unordered_map<Key, std::optional<RegressionModel>, KeyHash> cache;

  auto evaluate = [&](const Key& key) -> const std::optional<RegressionModel>& {
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    RegressionModel m = problem.fit_subset(key).model(problem.names);
    ++result.fitted;
    std::optional<RegressionModel> entry;
    if (m.condition_flag) {
      ++result.flagged;
    } else {
      entry = std::move(m);
    }
    return cache.emplace(key, std::move(entry)).first->second;
  };

  // Move types available from a model of size k.
  auto move_count = [&](std::size_t k) {
    std::size_t t = 0;
    if (k < max_size && k < p) ++t;  // add
    if (k > 1) ++t;                  // remove
    if (k < p) ++t;                  // swap
    return t;
  };

  Rng rng(seed);
  Key current = start.regressors;
  cache.emplace(current, start);
  const RegressionModel* current_model = &*cache.at(current);

  auto record = [&](const RegressionModel& m) {
    auto [it, inserted] = result.visited.try_emplace(m.regressors, m, 0);
    ++it->second.second;
  };

  for (std::size_t iter = 0; iter < config.mc3_iterations; ++iter) {
    const std::size_t k = current.size();
    const std::size_t moves = move_count(k);
    if (moves == 0) {
      record(*current_model);
      continue;
    }
    ++result.proposals;

    std::vector<std::size_t> absent;
    absent.reserve(p - k);
    for (std::size_t j = 0, c = 0; j < p; ++j) {
      if (c < k && current[c] == j) {
        ++c;
      } else {
        absent.push_back(j);
      }
    }

    // Enumerate move types in fixed order and pick one uniformly.
    enum class Move { add, remove, swap };
    std::vector<Move> options;
    if (k < max_size && k < p) options.push_back(Move::add);
    if (k > 1) options.push_back(Move::remove);
    if (k < p) options.push_back(Move::swap);
    const Move move = options[rng.index(options.size())];

    Key proposal = current;
    double forward_choices = 1.0;
    double reverse_choices = 1.0;
    switch (move) {
      case Move::add: {
        const std::size_t j = absent[rng.index(absent.size())];
        proposal = with_added(current, j);
        forward_choices = static_cast<double>(absent.size());
        reverse_choices = static_cast<double>(proposal.size());
        break;
      }
      case Move::remove: {
        proposal.erase(proposal.begin() + static_cast<std::ptrdiff_t>(rng.index(k)));
        forward_choices = static_cast<double>(k);
        reverse_choices = static_cast<double>(p - proposal.size());
        break;
      }
      case Move::swap: {
        const std::size_t out = rng.index(k);
        const std::size_t in = absent[rng.index(absent.size())];
        proposal.erase(proposal.begin() + static_cast<std::ptrdiff_t>(out));
        proposal = with_added(proposal, in);
        forward_choices = static_cast<double>(k * absent.size());
        reverse_choices = forward_choices;
        break;
      }
    }
    const double log_q_forward = -std::log(static_cast<double>(moves)) - std::log(forward_choices);
    const double log_q_reverse =
        -std::log(static_cast<double>(move_count(proposal.size()))) - std::log(reverse_choices);

    const auto& candidate = evaluate(proposal);
    if (candidate) {
      const double log_alpha = -(candidate->bic - current_model->bic) / 2.0 +
                               config.prior.log_weight(proposal.size()) -
                               config.prior.log_weight(current.size()) + log_q_reverse - log_q_forward;
      if (log_alpha >= 0.0 || rng.uniform() < std::exp(log_alpha)) {
        current = std::move(proposal);
        current_model = &*candidate;
        ++result.accepted;
      }
    }
    record(*current_model);
  }
  return result;
}

}  // namespace

ModelSet mc3_search(const RegressionProblem& problem, const SearchConfig& config) {
  prepare(problem, config);
  const std::size_t max_size = effective_max_size(problem, config);
  const std::size_t p = problem.candidate_count();

  // Every chain starts from the best single-regressor model.
  std::vector<std::optional<RegressionModel>> singles(p);
  const LeastSquaresFit root(problem.response, problem.intercept);
  parallel_for(p, config.threads, [&](std::size_t j) {
    RegressionModel m = root.extended(problem.candidates.col(static_cast<Eigen::Index>(j)), j).model(problem.names);
    if (!m.condition_flag) singles[j] = std::move(m);
  });
  const RegressionModel* start = nullptr;
  for (const auto& s : singles) {
    if (s && (!start || model_order(*s, *start))) start = &*s;
  }
  if (!start) throw SearchError(kModule, "every single-regressor model is numerically degenerate");

  std::vector<ChainResult> chains(config.mc3_chains);
  parallel_for(config.mc3_chains, config.threads, [&](std::size_t c) {
    chains[c] = run_chain(problem, config, max_size, config.seed + 0x9e3779b97f4a7c15ULL * c, *start);
  });

  SearchMetadata meta;
  meta.strategy = SearchStrategy::mc3;
  meta.fitted = p;
  for (const auto& s : singles) meta.flagged += s ? 0 : 1;
  std::map<Key, std::pair<RegressionModel, std::size_t>> merged;
  for (auto& chain : chains) {
    meta.fitted += chain.fitted;
    meta.flagged += chain.flagged;
    meta.accepted += chain.accepted;
    meta.proposals += chain.proposals;
    for (auto& [key, entry] : chain.visited) {
      auto [it, inserted] = merged.try_emplace(key, entry.first, 0);
      it->second.second += entry.second;
    }
  }

  std::vector<std::pair<RegressionModel, std::size_t>> ordered;
  ordered.reserve(merged.size());
  for (auto& [key, entry] : merged) ordered.push_back(std::move(entry));
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return model_order(a.first, b.first); });

  ModelSet set;
  set.regressor_names = problem.names;
  for (auto& [model, visits] : ordered) {
    set.models.push_back(std::move(model));
    meta.visit_counts.push_back(visits);
  }
  set.best_bic = set.models.front().bic;
  set.metadata = std::move(meta);
  return set;
}

ModelSet search(const RegressionProblem& problem, const SearchConfig& config) {
  switch (config.strategy) {
    case SearchStrategy::exhaustive: return exhaustive_search(problem, config);
    case SearchStrategy::occam: return occam_search(problem, config);
    case SearchStrategy::mc3: return mc3_search(problem, config);
  }
  throw InputError(kModule, "unknown strategy");
}

ModelSet exhaustive_search(const Spectrum& pixel, const SpectralLibrary& library, const SearchConfig& config) {
  return exhaustive_search(make_spectral_problem(pixel, library), config);
}

ModelSet occam_search(const Spectrum& pixel, const SpectralLibrary& library, const SearchConfig& config) {
  return occam_search(make_spectral_problem(pixel, library), config);
}

ModelSet mc3_search(const Spectrum& pixel, const SpectralLibrary& library, const SearchConfig& config) {
  return mc3_search(make_spectral_problem(pixel, library), config);
}

}  // namespace hbma
