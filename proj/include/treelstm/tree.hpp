#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "treelstm/error.hpp"

namespace treelstm {

/// Dense node identifier. Valid ids are 1..size(); the root is always 1.
using NodeId = std::size_t;

inline constexpr std::size_t kUnboundedOutdegree = std::numeric_limits<std::size_t>::max();

enum class Direction { bottom_up, top_down };

inline std::string to_string(Direction d) {
  return d == Direction::bottom_up ? "bottom_up" : "top_down";
}

/// Unvalidated node/edge/label collections. Raw ids are arbitrary; the
/// order of edges sharing a parent defines child order.
template <class Label>
struct RawTree {
  std::vector<std::pair<std::size_t, Label>> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (parent, child)
};

/// Labels erased: node count plus (parent, child) pairs in id order.
struct Skeleton {
  std::size_t node_count = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;

  bool operator==(const Skeleton&) const = default;
};

template <class Label>
class Tree;

template <class Label>
Tree<Label> validate(const RawTree<Label>& raw, std::size_t max_outdegree = kUnboundedOutdegree);

/// Ordered labeled rooted tree. Immutable once built; every "modifying"
/// member returns a new tree.
template <class Label>
class Tree {
 public:
  using label_type = Label;

  std::size_t size() const { return labels_.size() - 1; }
  NodeId root() const { return 1; }
  std::size_t max_outdegree() const { return max_outdegree_; }

  std::optional<NodeId> parent(NodeId u) const {
    if (parent_[u] == 0) return std::nullopt;
    return parent_[u];
  }
  std::span<const NodeId> children(NodeId u) const { return children_[u]; }
  std::size_t outdegree(NodeId u) const { return children_[u].size(); }
  bool is_leaf(NodeId u) const { return children_[u].empty(); }
  const Label& label(NodeId u) const { return labels_[u]; }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (NodeId u = 1; u <= size(); ++u) n += children_[u].size();
    return n;
  }

  /// Depth of u (root has depth 0).
  std::size_t depth(NodeId u) const {
    std::size_t d = 0;
    while (parent_[u] != 0) {
      u = parent_[u];
      ++d;
    }
    return d;
  }

  /// Leaves in left-to-right order.
  std::vector<NodeId> leaves() const {
    std::vector<NodeId> out;
    for (NodeId u : preorder())
      if (is_leaf(u)) out.push_back(u);
    return out;
  }

  std::vector<NodeId> preorder() const {
    std::vector<NodeId> order;
    order.reserve(size());
    std::vector<NodeId> stack{root()};
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      order.push_back(u);
      const auto& ch = children_[u];
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    return order;
  }

  std::vector<NodeId> postorder() const {
    std::vector<NodeId> order;
    order.reserve(size());
    // (node, next child index)
    std::vector<std::pair<NodeId, std::size_t>> stack{{root(), 0}};
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next < children_[u].size()) {
        NodeId c = children_[u][next++];
        stack.emplace_back(c, 0);
      } else {
        order.push_back(u);
        stack.pop_back();
      }
    }
    return order;
  }

  /// Same skeleton, labels transformed by f(id, label).
  template <class F>
  auto map_labels(F&& f) const -> Tree<std::invoke_result_t<F, NodeId, const Label&>> {
    using Out = std::invoke_result_t<F, NodeId, const Label&>;
    Tree<Out> out;
    out.parent_ = parent_;
    out.children_ = children_;
    out.max_outdegree_ = max_outdegree_;
    out.labels_.resize(labels_.size());
    for (NodeId u = 1; u <= size(); ++u) out.labels_[u] = f(u, labels_[u]);
    return out;
  }

  Tree with_label(NodeId u, Label value) const {
    Tree out = *this;
    out.labels_[u] = std::move(value);
    return out;
  }

  /// Reorders the children of u so that new position k holds old position
  /// perm[k]. Node ids are preserved.
  Tree with_children_permuted(NodeId u, std::span<const std::size_t> perm) const {
    const auto& ch = children_[u];
    if (perm.size() != ch.size())
      throw Error(Errc::inconsistent_edges, "permutation length differs from child count");
    std::vector<bool> seen(ch.size(), false);
    std::vector<NodeId> reordered;
    reordered.reserve(ch.size());
    for (std::size_t k : perm) {
      if (k >= ch.size() || seen[k]) throw Error(Errc::inconsistent_edges, "not a permutation");
      seen[k] = true;
      reordered.push_back(ch[k]);
    }
    Tree out = *this;
    out.children_[u] = std::move(reordered);
    return out;
  }

  /// Replaces the subtree rooted at `at` with `sub`. The result is
  /// renumbered; the second member maps every old id to its new id, or 0
  /// for nodes of the removed subtree.
  std::pair<Tree, std::vector<NodeId>> replace_subtree(NodeId at, const Tree& sub) const {
    RawTree<Label> raw;
    std::vector<bool> removed(labels_.size(), false);
    {
      std::vector<NodeId> stack{at};
      while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        removed[u] = true;
        for (NodeId c : children_[u]) stack.push_back(c);
      }
    }
    const std::size_t offset = size();  // raw ids for sub nodes: offset + id
    for (NodeId u : preorder()) {
      if (removed[u]) {
        if (u != at) continue;
        for (NodeId s : sub.preorder()) {
          raw.nodes.emplace_back(offset + s, sub.labels_[s]);
          for (NodeId c : sub.children_[s]) raw.edges.emplace_back(offset + s, offset + c);
        }
        continue;
      }
      raw.nodes.emplace_back(u, labels_[u]);
      for (NodeId c : children_[u]) {
        NodeId target = c == at ? offset + sub.root() : c;
        raw.edges.emplace_back(u, target);
      }
    }
    auto [tree, raw_to_new] = validate_with_map(raw, std::max(max_outdegree_, sub.max_outdegree_));
    std::vector<NodeId> mapping(labels_.size(), 0);
    for (NodeId u = 1; u <= size(); ++u)
      if (!removed[u]) mapping[u] = raw_to_new.at(u);
    return {std::move(tree), std::move(mapping)};
  }

  /// Same shape and labels; the out-degree bound is not compared.
  bool operator==(const Tree& o) const {
    return parent_ == o.parent_ && children_ == o.children_ && labels_ == o.labels_;
  }

 private:
  template <class>
  friend class Tree;
  friend Tree validate<Label>(const RawTree<Label>&, std::size_t);

  static std::pair<Tree, std::unordered_map<std::size_t, NodeId>> validate_with_map(
      const RawTree<Label>& raw, std::size_t max_outdegree);

  // Index 0 is unused so that ids index directly.
  std::vector<NodeId> parent_;  // 0 = no parent
  std::vector<std::vector<NodeId>> children_;
  std::vector<Label> labels_;
  std::size_t max_outdegree_ = kUnboundedOutdegree;
};

template <class Label>
std::pair<Tree<Label>, std::unordered_map<std::size_t, NodeId>> Tree<Label>::validate_with_map(
    const RawTree<Label>& raw, std::size_t max_outdegree) {
  const std::size_t n = raw.nodes.size();
  if (n == 0) throw Error(Errc::empty_tree, "tree has no nodes");

  std::unordered_map<std::size_t, std::size_t> slot;  // raw id -> position in raw.nodes
  for (std::size_t i = 0; i < n; ++i) {
    if (!slot.emplace(raw.nodes[i].first, i).second)
      throw Error(Errc::inconsistent_edges, "duplicate node id " + std::to_string(raw.nodes[i].first));
  }

  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parent(n, none);
  std::vector<std::vector<std::size_t>> children(n);
  for (auto [p, c] : raw.edges) {
    auto pit = slot.find(p);
    auto cit = slot.find(c);
    if (pit == slot.end() || cit == slot.end())
      throw Error(Errc::inconsistent_edges,
                  "edge (" + std::to_string(p) + ", " + std::to_string(c) + ") references an unknown node");
    if (parent[cit->second] != none)
      throw Error(Errc::inconsistent_edges, "node " + std::to_string(c) + " has more than one parent");
    parent[cit->second] = pit->second;
    children[pit->second].push_back(cit->second);
  }

  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i)
    if (parent[i] == none) roots.push_back(i);
  if (roots.size() > 1)
    throw Error(Errc::multiple_roots, std::to_string(roots.size()) + " nodes have no parent");
  if (roots.empty()) throw Error(Errc::cycle_detected, "no root: every node has a parent");

  for (std::size_t i = 0; i < n; ++i) {
    if (children[i].size() > max_outdegree)
      throw Error(Errc::outdegree_exceeded, "node " + std::to_string(raw.nodes[i].first) + " has degree " +
                                                std::to_string(children[i].size()) + " > " +
                                                std::to_string(max_outdegree));
  }

  // Preorder renumbering from the root. With one parent per node, anything
  // unreachable from the root must sit on a cycle.
  Tree<Label> tree;
  tree.max_outdegree_ = max_outdegree;
  tree.parent_.assign(n + 1, 0);
  tree.children_.assign(n + 1, {});
  tree.labels_.resize(n + 1);
  std::vector<NodeId> new_id(n, 0);
  std::vector<std::size_t> stack{roots.front()};
  NodeId next = 1;
  while (!stack.empty()) {
    std::size_t i = stack.back();
    stack.pop_back();
    new_id[i] = next++;
    for (auto it = children[i].rbegin(); it != children[i].rend(); ++it) stack.push_back(*it);
  }
  if (next != n + 1) throw Error(Errc::cycle_detected, "nodes unreachable from the root form a cycle");

  std::unordered_map<std::size_t, NodeId> raw_to_new;
  for (std::size_t i = 0; i < n; ++i) {
    NodeId u = new_id[i];
    raw_to_new.emplace(raw.nodes[i].first, u);
    tree.labels_[u] = raw.nodes[i].second;
    tree.parent_[u] = parent[i] == none ? 0 : new_id[parent[i]];
    tree.children_[u].reserve(children[i].size());
    for (std::size_t c : children[i]) tree.children_[u].push_back(new_id[c]);
  }
  return {std::move(tree), std::move(raw_to_new)};
}

/// Checks the structural invariants and renumbers nodes in preorder so the
/// root becomes id 1.
template <class Label>
Tree<Label> validate(const RawTree<Label>& raw, std::size_t max_outdegree) {
  return Tree<Label>::validate_with_map(raw, max_outdegree).first;
}

template <class Label>
Skeleton skeleton(const Tree<Label>& tree) {
  Skeleton s;
  s.node_count = tree.size();
  for (NodeId u = 1; u <= tree.size(); ++u)
    for (NodeId c : tree.children(u)) s.edges.emplace_back(u, c);
  std::sort(s.edges.begin(), s.edges.end());
  return s;
}

namespace detail {

// Bottom-up canonical codes: equal codes <=> isomorphic rooted subtrees.
// The dictionary is shared so codes are comparable across trees.
template <class Label>
std::vector<std::size_t> canonical_codes(const Tree<Label>& tree, bool ordered,
                                         std::map<std::vector<std::size_t>, std::size_t>& dict) {
  std::vector<std::size_t> code(tree.size() + 1, 0);
  for (NodeId u : tree.postorder()) {
    std::vector<std::size_t> key;
    key.reserve(tree.outdegree(u));
    for (NodeId c : tree.children(u)) key.push_back(code[c]);
    if (!ordered) std::sort(key.begin(), key.end());
    auto [it, inserted] = dict.emplace(std::move(key), dict.size());
    code[u] = it->second;
  }
  return code;
}

}  // namespace detail

/// Ordered mode compares shapes with children matched by position.
/// Unordered mode decides whether an edge-preserving bijection exists,
/// using sorted canonical encodings of the rooted subtrees.
template <class LabelA, class LabelB>
bool is_isomorphic(const Tree<LabelA>& a, const Tree<LabelB>& b, bool ordered) {
  if (a.size() != b.size()) return false;
  std::map<std::vector<std::size_t>, std::size_t> dict;
  auto ca = detail::canonical_codes(a, ordered, dict);
  auto cb = detail::canonical_codes(b, ordered, dict);
  return ca[a.root()] == cb[b.root()];
}

/// bottom_up: every node after all of its children (postorder).
/// top_down: every node after its parent (preorder).
template <class Label>
std::vector<NodeId> schedule(const Tree<Label>& tree, Direction direction) {
  return direction == Direction::bottom_up ? tree.postorder() : tree.preorder();
}

}  // namespace treelstm
