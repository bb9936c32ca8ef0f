#include "hbma/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "hbma/errors.hpp"

namespace hbma {

namespace {

constexpr const char* kModule = "bma-aggregate";

std::optional<std::size_t> candidate_index(const ModelSet& set, std::string_view name) {
  auto it = std::find(set.regressor_names.begin(), set.regressor_names.end(), name);
  if (it == set.regressor_names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - set.regressor_names.begin());
}

std::vector<std::uint8_t> member_mask(const ModelSet& set, std::span<const std::string> members) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < set.regressor_names.size(); ++i) index.emplace(set.regressor_names[i], i);
  std::vector<std::uint8_t> mask(set.regressor_names.size(), 0);
  for (const auto& m : members) {
    auto it = index.find(m);
    if (it != index.end()) mask[it->second] = 1;
  }
  return mask;
}

double masked_probability(const ModelPosterior& posterior, const std::vector<std::uint8_t>& mask) {
  double total = 0.0;
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    const auto& regs = posterior.models.models[i].regressors;
    if (std::any_of(regs.begin(), regs.end(), [&](std::size_t r) { return mask[r] != 0; })) {
      total += posterior.probabilities[i];
    }
  }
  return std::min(total, 1.0);
}

TreeNode annotate(const ModelPosterior& posterior, const ClassHierarchy& hierarchy, ClassHierarchy::NodeId id) {
  const auto& node = hierarchy.node(id);
  TreeNode out;
  out.name = node.name;
  out.path = hierarchy.path_of(id);
  out.has_direct_members = !node.direct_members.empty();
  out.probability = id == ClassHierarchy::root_id ? 1.0 : class_probability(posterior, hierarchy, id);
  for (auto child : node.children) out.children.push_back(annotate(posterior, hierarchy, child));
  std::sort(out.children.begin(), out.children.end(), [](const TreeNode& a, const TreeNode& b) {
    if (a.probability != b.probability) return a.probability < b.probability;
    return a.name < b.name;
  });
  return out;
}

const TreeNode* find_in(const TreeNode& node, std::string_view path) {
  if (node.path == path) return &node;
  for (const auto& child : node.children) {
    if (const TreeNode* hit = find_in(child, path)) return hit;
  }
  return nullptr;
}

}  // namespace

ModelPosterior normalize(const ModelSet& models, const ModelPrior& prior) {
  if (models.empty()) throw InputError(kModule, "cannot normalize an empty model set");
  double bic_min = std::numeric_limits<double>::infinity();
  for (const auto& m : models.models) {
    if (!std::isfinite(m.bic)) throw NumericalError(kModule, "model BIC is not finite");
    bic_min = std::min(bic_min, m.bic);
  }
  std::vector<double> log_w(models.size());
  double log_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models.models[i];
    log_w[i] = -(m.bic - bic_min) / 2.0 + prior.log_weight(m.size());
    log_max = std::max(log_max, log_w[i]);
  }
  ModelPosterior out{models, std::vector<double>(models.size()), prior};
  double total = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    out.probabilities[i] = std::exp(log_w[i] - log_max);
    total += out.probabilities[i];
  }
  for (double& p : out.probabilities) p /= total;
  return out;
}

InclusionLookup inclusion_probability(const ModelPosterior& posterior, std::string_view regressor) {
  const auto index = candidate_index(posterior.models, regressor);
  if (!index) return {0.0, false};
  double total = 0.0;
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    if (posterior.models.models[i].contains(*index)) total += posterior.probabilities[i];
  }
  return {std::min(total, 1.0), true};
}

std::optional<std::size_t> InclusionReport::index_of(std::string_view name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

InclusionReport averaged_coefficients(const ModelPosterior& posterior) {
  const auto& set = posterior.models;
  InclusionReport report;
  report.names = set.regressor_names;
  report.inclusion.assign(report.names.size(), 0.0);
  report.averaged.assign(report.names.size(), 0.0);
  double intercept = 0.0;
  bool any_intercept = false;
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    const auto& m = set.models[i];
    const double p = posterior.probabilities[i];
    for (std::size_t k = 0; k < m.size(); ++k) {
      report.inclusion[m.regressors[k]] += p;
      report.averaged[m.regressors[k]] += p * m.coefficients[k];
    }
    if (m.intercept) {
      intercept += p * *m.intercept;
      any_intercept = true;
    }
  }
  for (double& v : report.inclusion) v = std::min(v, 1.0);
  if (any_intercept) report.averaged_intercept = intercept;
  return report;
}

double group_probability(const ModelPosterior& posterior, std::span<const std::string> members) {
  return masked_probability(posterior, member_mask(posterior.models, members));
}

double class_probability(const ModelPosterior& posterior, const ClassHierarchy& hierarchy,
                         ClassHierarchy::NodeId node) {
  const auto names = hierarchy.members_of(node);
  return group_probability(posterior, names);
}

double class_probability(const ModelPosterior& posterior, const ClassHierarchy& hierarchy,
                         std::string_view path_or_name) {
  return class_probability(posterior, hierarchy, hierarchy.resolve(path_or_name));
}

double class_probability_per_spectrum_sum(const ModelPosterior& posterior, const ClassHierarchy& hierarchy,
                                          ClassHierarchy::NodeId node) {
  double total = 0.0;
  for (const auto& name : hierarchy.members_of(node)) total += inclusion_probability(posterior, name).probability;
  return total;
}

const TreeNode* IdentificationTree::find(std::string_view path) const {
  if (path == ClassHierarchy::root_name) return &root;
  return find_in(root, path);
}

IdentificationTree build_tree(const ModelPosterior& posterior, const ClassHierarchy& hierarchy) {
  return IdentificationTree{annotate(posterior, hierarchy, ClassHierarchy::root_id)};
}

}  // namespace hbma
