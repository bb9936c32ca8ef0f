#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hbma/regression.hpp"
#include "hbma/spectral.hpp"

namespace hbma {

enum class SearchStrategy { exhaustive, occam, mc3 };

std::string to_string(SearchStrategy strategy);
SearchStrategy parse_strategy(const std::string& text);

struct SearchConfig {
  std::size_t max_size = 4;
  double window_c = 20.0;  // Occam's window ratio C: keep BIC <= best + 2 ln C
  SearchStrategy strategy = SearchStrategy::occam;
  std::size_t mc3_iterations = 20000;
  std::size_t mc3_chains = 1;
  std::uint64_t seed = 0;
  ModelPrior prior;
  std::size_t enumeration_cap = 2'000'000;
  std::size_t level_cap = 50'000;
  /// Strict Occam's razor: also drop any model that has a retained proper
  /// sub-model with lower BIC.
  bool submodel_exclusion = false;
  unsigned threads = 1;

  void validate() const;
  double window() const;  // 2 ln C
};

struct LevelStats {
  std::size_t size = 0;
  std::size_t candidates = 0;
  std::size_t survivors = 0;
  bool cap_hit = false;
};

struct SearchMetadata {
  SearchStrategy strategy = SearchStrategy::exhaustive;
  std::size_t fitted = 0;   // models fitted (all strategies)
  std::size_t flagged = 0;  // discarded as near-singular
  std::vector<LevelStats> levels;             // occam
  std::vector<std::size_t> visit_counts;      // mc3, parallel to ModelSet::models
  std::size_t accepted = 0;                   // mc3
  std::size_t proposals = 0;                  // mc3
  std::size_t excluded_by_submodel = 0;       // occam with submodel_exclusion
};

/// Retained models ordered by ascending BIC, ties broken by regressor names.
struct ModelSet {
  std::vector<RegressionModel> models;
  std::vector<std::string> regressor_names;  // the full candidate universe
  double best_bic = 0.0;
  SearchMetadata metadata;

  bool empty() const { return models.empty(); }
  std::size_t size() const { return models.size(); }
};

/// Orders models by BIC then by lexicographic regressor-name sequence.
bool model_order(const RegressionModel& a, const RegressionModel& b);

/// Sorts, dedupes by regressor set, and refreshes best_bic.
void canonicalize(ModelSet& set);

/// Keeps only models with BIC <= best + 2 ln C.
ModelSet apply_window(const ModelSet& set, double window_c);

/// Drops every model that has a proper sub-model in the set with lower BIC.
ModelSet exclude_dominated_supermodels(const ModelSet& set, std::size_t* excluded = nullptr);

/// Number of subsets of size 1..max_size from p candidates, saturating.
std::uint64_t subset_count(std::size_t p, std::size_t max_size);

ModelSet exhaustive_search(const RegressionProblem& problem, const SearchConfig& config);
ModelSet occam_search(const RegressionProblem& problem, const SearchConfig& config);
ModelSet mc3_search(const RegressionProblem& problem, const SearchConfig& config);

/// Dispatches on config.strategy.
ModelSet search(const RegressionProblem& problem, const SearchConfig& config);

ModelSet exhaustive_search(const Spectrum& pixel, const SpectralLibrary& library, const SearchConfig& config);
ModelSet occam_search(const Spectrum& pixel, const SpectralLibrary& library, const SearchConfig& config);
ModelSet mc3_search(const Spectrum& pixel, const SpectralLibrary& library, const SearchConfig& config);

}  // namespace hbma
