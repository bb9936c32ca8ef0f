#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hbma {

/// Tree of material classes rooted at the synthetic class "Library".
///
/// Built from one class path per member (root-most label first, "Library"
/// itself never appears in a path). Every member sits at the node its path
/// ends on; a node's member set is its direct members plus everything below.
class ClassHierarchy {
 public:
  using NodeId = std::size_t;
  static constexpr NodeId root_id = 0;
  static constexpr std::string_view root_name = "Library";

  struct Node {
    std::string name;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
    std::vector<std::size_t> direct_members;  // indices into member_names()
    std::vector<std::size_t> members;         // sorted, includes descendants
  };

  ClassHierarchy();

  /// member_names[i] is filed under class_paths[i]. Names must be unique and
  /// paths non-empty.
  ClassHierarchy(std::vector<std::string> member_names,
                 const std::vector<std::vector<std::string>>& class_paths);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const;
  const Node& root() const { return nodes_[root_id]; }
  const std::vector<std::string>& member_names() const { return member_names_; }

  /// Slash-separated path below the root, e.g. "Fabric/Polymer/Nylon".
  /// An empty string or "Library" resolves to the root.
  std::optional<NodeId> find_path(std::string_view path) const;

  /// Lookup by bare class name; fails when the name is used at several
  /// places in the tree.
  std::optional<NodeId> find_name(std::string_view name) const;

  /// Accepts either a path or an unambiguous class name. Throws InputError.
  NodeId resolve(std::string_view path_or_name) const;

  std::string path_of(NodeId id) const;
  std::vector<std::string> members_of(NodeId id) const;

  /// Node the member's class path terminates on.
  NodeId leaf_of(std::size_t member) const { return leaf_of_[member]; }

 private:
  NodeId child_named(NodeId parent, const std::string& name);

  std::vector<Node> nodes_;
  std::vector<std::string> member_names_;
  std::vector<NodeId> leaf_of_;
};

}  // namespace hbma
