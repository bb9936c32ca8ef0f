#include "hbma/hierarchy.hpp"

#include <algorithm>
#include <unordered_set>

#include "hbma/errors.hpp"

namespace hbma {

namespace {

constexpr const char* kModule = "spectral-core";

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t slash = path.find('/', start);
    const std::size_t end = slash == std::string_view::npos ? path.size() : slash;
    if (end > start) parts.emplace_back(path.substr(start, end - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return parts;
}

}  // namespace

ClassHierarchy::ClassHierarchy() : ClassHierarchy({}, {}) {}

ClassHierarchy::ClassHierarchy(std::vector<std::string> member_names,
                               const std::vector<std::vector<std::string>>& class_paths)
    : member_names_(std::move(member_names)) {
  if (class_paths.size() != member_names_.size()) {
    throw InputError(kModule, "class path count does not match member count");
  }
  nodes_.push_back(Node{std::string(root_name), std::nullopt, {}, {}, {}});

  std::unordered_set<std::string> seen;
  leaf_of_.reserve(member_names_.size());
  for (std::size_t i = 0; i < member_names_.size(); ++i) {
    if (!seen.insert(member_names_[i]).second) {
      throw InputError(kModule, "duplicate spectrum name '" + member_names_[i] + "'");
    }
    const auto& path = class_paths[i];
    if (path.empty()) {
      throw InputError(kModule, "empty class path for '" + member_names_[i] + "'");
    }
    NodeId at = root_id;
    for (const auto& label : path) {
      if (label.empty()) throw InputError(kModule, "empty class label for '" + member_names_[i] + "'");
      if (label == root_name) {
        throw InputError(kModule, "class path for '" + member_names_[i] +
                                      "' must not name the implicit root 'Library'");
      }
      at = child_named(at, label);
    }
    nodes_[at].direct_members.push_back(i);
    leaf_of_.push_back(at);
  }

  // Nodes are created parent-first, so a reverse sweep sees children before
  // their parents.
  for (NodeId id = nodes_.size(); id-- > 0;) {
    auto& node = nodes_[id];
    node.members = node.direct_members;
    for (NodeId child : node.children) {
      const auto& cm = nodes_[child].members;
      node.members.insert(node.members.end(), cm.begin(), cm.end());
    }
    std::sort(node.members.begin(), node.members.end());
  }
}

ClassHierarchy::NodeId ClassHierarchy::child_named(NodeId parent, const std::string& name) {
  for (NodeId child : nodes_[parent].children) {
    if (nodes_[child].name == name) return child;
  }
  const NodeId id = nodes_.size();
  nodes_.push_back(Node{name, parent, {}, {}, {}});
  nodes_[parent].children.push_back(id);
  return id;
}

const ClassHierarchy::Node& ClassHierarchy::node(NodeId id) const {
  if (id >= nodes_.size()) throw InputError(kModule, "unknown hierarchy node id " + std::to_string(id));
  return nodes_[id];
}

std::optional<ClassHierarchy::NodeId> ClassHierarchy::find_path(std::string_view path) const {
  auto parts = split_path(path);
  if (!parts.empty() && parts.front() == root_name) parts.erase(parts.begin());
  NodeId at = root_id;
  for (const auto& label : parts) {
    const auto& children = nodes_[at].children;
    auto it = std::find_if(children.begin(), children.end(),
                           [&](NodeId c) { return nodes_[c].name == label; });
    if (it == children.end()) return std::nullopt;
    at = *it;
  }
  return at;
}

std::optional<ClassHierarchy::NodeId> ClassHierarchy::find_name(std::string_view name) const {
  std::optional<NodeId> found;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].name != name) continue;
    if (found) {
      throw InputError(kModule, "class name '" + std::string(name) +
                                    "' is ambiguous; use a full path");
    }
    found = id;
  }
  return found;
}

ClassHierarchy::NodeId ClassHierarchy::resolve(std::string_view path_or_name) const {
  if (path_or_name.find('/') == std::string_view::npos) {
    if (auto id = find_name(path_or_name)) return *id;
  }
  if (auto id = find_path(path_or_name)) return *id;
  throw InputError(kModule, "unknown class '" + std::string(path_or_name) + "'");
}

std::string ClassHierarchy::path_of(NodeId id) const {
  std::vector<std::string_view> parts;
  for (std::optional<NodeId> at = id; at && *at != root_id; at = node(*at).parent) {
    parts.push_back(nodes_[*at].name);
  }
  std::string out;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (!out.empty()) out += '/';
    out += *it;
  }
  return out;
}

std::vector<std::string> ClassHierarchy::members_of(NodeId id) const {
  std::vector<std::string> names;
  for (std::size_t m : node(id).members) names.push_back(member_names_[m]);
  return names;
}

}  // namespace hbma
