#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbma/hierarchy.hpp"
#include "hbma/search.hpp"

namespace hbma {

/// Normalized posterior over a retained model set.
struct ModelPosterior {
  ModelSet models;
  std::vector<double> probabilities;  // parallel to models.models
  ModelPrior prior;

  std::size_t size() const { return probabilities.size(); }
};

/// P(M_i) proportional to exp(-(BIC_i - BIC_min) / 2) * Pr(M_i), computed in
/// shifted-log form.
ModelPosterior normalize(const ModelSet& models, const ModelPrior& prior = {});

struct InclusionLookup {
  double probability = 0.0;
  bool in_library = false;  // false when the name is not a candidate at all
};

/// Sum of P(M) over models that contain the named regressor.
InclusionLookup inclusion_probability(const ModelPosterior& posterior, std::string_view regressor);

struct InclusionReport {
  std::vector<std::string> names;  // the full candidate universe
  std::vector<double> inclusion;   // P(X_k)
  std::vector<double> averaged;    // sum over M containing X_k of P(M) * beta_k^M
  std::optional<double> averaged_intercept;

  std::optional<std::size_t> index_of(std::string_view name) const;
};

InclusionReport averaged_coefficients(const ModelPosterior& posterior);

/// Probability that at least one member of `members` is in the model: each
/// model counts once no matter how many members it holds.
double group_probability(const ModelPosterior& posterior, std::span<const std::string> members);

/// group_probability over the member set of a hierarchy node.
double class_probability(const ModelPosterior& posterior, const ClassHierarchy& hierarchy,
                         ClassHierarchy::NodeId node);
double class_probability(const ModelPosterior& posterior, const ClassHierarchy& hierarchy,
                         std::string_view path_or_name);

/// Diagnostic only: sum of member inclusion probabilities, which can exceed 1
/// when a model holds several members.
double class_probability_per_spectrum_sum(const ModelPosterior& posterior, const ClassHierarchy& hierarchy,
                                          ClassHierarchy::NodeId node);

struct TreeNode {
  std::string name;
  std::string path;  // slash path below the root; empty for the root
  double probability = 0.0;
  bool has_direct_members = false;
  std::vector<TreeNode> children;  // ascending probability, ties by name
};

struct IdentificationTree {
  TreeNode root;

  /// Depth-first search by slash path.
  const TreeNode* find(std::string_view path) const;
};

/// Annotates every class with its class_probability. The root is pinned to 1.
IdentificationTree build_tree(const ModelPosterior& posterior, const ClassHierarchy& hierarchy);

}  // namespace hbma
