#pragma once

// Output heads for the three isomorphic transductions (tree classification,
// node relabeling, pruning) and their composition with an encoder.

#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "treelstm/autodiff.hpp"
#include "treelstm/cells.hpp"
#include "treelstm/error.hpp"
#include "treelstm/labels.hpp"
#include "treelstm/tree.hpp"

namespace treelstm {

enum class TaskKind { supersource, relabel, prune };
enum class MaskPolicy { internal, all };

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::supersource: return "supersource";
    case TaskKind::relabel: return "relabel";
    case TaskKind::prune: return "prune";
  }
  return "?";
}

inline std::string to_string(MaskPolicy m) { return m == MaskPolicy::internal ? "internal" : "all"; }

inline constexpr double kKeepThreshold = 0.5;

struct TaskSpec {
  TaskKind kind = TaskKind::supersource;
  std::size_t classes = 2;  // unused for prune
  MaskPolicy mask = MaskPolicy::internal;
  bool subtree_consistent = false;  // prune post-process, off by default

  std::size_t output_dim() const { return kind == TaskKind::prune ? 1 : classes; }

  void check() const {
    if (kind != TaskKind::prune && classes < 2)
      throw Error(Errc::label_out_of_range, "a class alphabet needs at least 2 symbols");
  }
};

/// Nodes scored by a relabel head. The internal policy falls back to the
/// root when the tree is a single leaf.
template <class Label>
std::vector<NodeId> target_mask(const Tree<Label>& tree, MaskPolicy policy) {
  std::vector<NodeId> mask;
  for (NodeId u = 1; u <= tree.size(); ++u)
    if (policy == MaskPolicy::all || !tree.is_leaf(u)) mask.push_back(u);
  if (mask.empty()) mask.push_back(tree.root());
  return mask;
}

struct HeadParams {
  Parameter W, b;

  static HeadParams create(std::size_t outputs, std::size_t hidden, Rng& rng) {
    HeadParams h;
    h.W = detail::weight("head.W", outputs, hidden, hidden, rng);
    h.b = detail::bias("head.b", outputs);
    return h;
  }

  template <class F>
  void for_each_parameter(F&& f) {
    f(W);
    f(b);
  }
};

struct HeadVars {
  Var W, b;
};

inline HeadVars bind(Graph& g, HeadParams& p) { return {g.parameter(p.W), g.parameter(p.b)}; }

/// Graph-side head outputs; which members are filled depends on `kind`.
struct HeadOutput {
  TaskKind kind = TaskKind::supersource;
  Var tree_log_probs;                            // supersource
  std::vector<std::optional<Var>> node_log_probs;  // relabel, by NodeId
  std::vector<Var> keep_logits;                  // prune, by NodeId
};

/// Bottom-up encodings read the root's h; top-down encodings the mean h
/// over all nodes.
inline HeadOutput supersource_scores(Graph& g, std::span<const NodeState> states, Direction direction,
                                     const HeadVars& head) {
  Var readout;
  if (direction == Direction::bottom_up) {
    readout = states[1].h;
  } else {
    std::vector<Var> hs;
    hs.reserve(states.size() - 1);
    for (std::size_t u = 1; u < states.size(); ++u) hs.push_back(states[u].h);
    readout = g.mean_list(hs, g.value(hs.front()).rows());
  }
  HeadOutput out;
  out.kind = TaskKind::supersource;
  out.tree_log_probs = g.log_softmax(g.affine(head.W, readout, head.b));
  return out;
}

inline HeadOutput relabel_scores(Graph& g, std::span<const NodeState> states, const HeadVars& head,
                                 std::span<const NodeId> mask) {
  if (mask.empty()) throw Error(Errc::empty_mask, "relabel head needs at least one target node");
  HeadOutput out;
  out.kind = TaskKind::relabel;
  out.node_log_probs.resize(states.size());
  for (NodeId u : mask) {
    if (u == 0 || u >= states.size()) throw Error(Errc::empty_mask, "mask names unknown node " + std::to_string(u));
    out.node_log_probs[u] = g.log_softmax(g.affine(head.W, states[u].h, head.b));
  }
  return out;
}

inline HeadOutput prune_scores(Graph& g, std::span<const NodeState> states, const HeadVars& head) {
  HeadOutput out;
  out.kind = TaskKind::prune;
  out.keep_logits.resize(states.size());
  for (std::size_t u = 1; u < states.size(); ++u) out.keep_logits[u] = g.affine(head.W, states[u].h, head.b);
  return out;
}

struct ClassPrediction {
  std::size_t label = 0;
  std::vector<double> log_probs;
};

struct Prediction {
  TaskKind kind = TaskKind::supersource;
  std::optional<ClassPrediction> tree_class;
  std::vector<std::optional<ClassPrediction>> node_classes;  // by NodeId
  std::vector<double> keep_probability;                      // by NodeId
  std::vector<bool> keep;                                    // by NodeId
};

/// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline ClassPrediction read_class(const Graph& g, Var log_probs) {
  ClassPrediction c;
  const auto vals = g.value(log_probs).values();
  c.log_probs.assign(vals.begin(), vals.end());
  c.label = argmax(c.log_probs);
  return c;
}

/// Keep iff probability >= 0.5; strictly below drops.
inline Prediction read_prediction(const Graph& g, const HeadOutput& out) {
  Prediction p;
  p.kind = out.kind;
  switch (out.kind) {
    case TaskKind::supersource: p.tree_class = read_class(g, out.tree_log_probs); break;
    case TaskKind::relabel:
      p.node_classes.resize(out.node_log_probs.size());
      for (std::size_t u = 0; u < out.node_log_probs.size(); ++u)
        if (out.node_log_probs[u]) p.node_classes[u] = read_class(g, *out.node_log_probs[u]);
      break;
    case TaskKind::prune:
      p.keep_probability.assign(out.keep_logits.size(), 0.0);
      p.keep.assign(out.keep_logits.size(), false);
      for (std::size_t u = 1; u < out.keep_logits.size(); ++u) {
        p.keep_probability[u] = Graph::logistic(g.scalar(out.keep_logits[u]));
        p.keep[u] = p.keep_probability[u] >= kKeepThreshold;
      }
      break;
  }
  return p;
}

inline Prediction supersource_head(Graph& g, std::span<const NodeState> states, Direction direction,
                                   const HeadVars& head) {
  return read_prediction(g, supersource_scores(g, states, direction, head));
}

inline Prediction relabel_head(Graph& g, std::span<const NodeState> states, const HeadVars& head,
                               std::span<const NodeId> mask) {
  return read_prediction(g, relabel_scores(g, states, head, mask));
}

inline Prediction prune_head(Graph& g, std::span<const NodeState> states, const HeadVars& head) {
  return read_prediction(g, prune_scores(g, states, head));
}

/// Drops every descendant of a dropped node.
template <class Label>
Prediction make_subtree_consistent(const Tree<Label>& tree, Prediction p) {
  for (NodeId u : tree.preorder())
    if (auto pa = tree.parent(u); pa && !p.keep[*pa]) p.keep[u] = false;
  return p;
}

/// Encoder followed by the task's head.
template <class Label>
HeadOutput compose_scores(Graph& g, const Tree<Label>& tree, std::span<const Var> inputs, const CellVars& cell,
                          const HeadVars& head, const TaskSpec& task) {
  const Direction direction = std::holds_alternative<TDCellVars>(cell) ? Direction::top_down : Direction::bottom_up;
  const auto states = encode(g, tree, cell, direction, inputs);
  switch (task.kind) {
    case TaskKind::supersource: return supersource_scores(g, states, direction, head);
    case TaskKind::relabel: {
      const auto mask = target_mask(tree, task.mask);
      return relabel_scores(g, states, head, mask);
    }
    case TaskKind::prune: return prune_scores(g, states, head);
  }
  throw Error(Errc::bad_format, "unknown task");
}

template <class Label>
Prediction compose(Graph& g, const Tree<Label>& tree, std::span<const Var> inputs, const CellVars& cell,
                   const HeadVars& head, const TaskSpec& task) {
  Prediction p = read_prediction(g, compose_scores(g, tree, inputs, cell, head, task));
  if (task.kind == TaskKind::prune && task.subtree_consistent) p = make_subtree_consistent(tree, std::move(p));
  return p;
}

/// Same skeleton; predicted categories on scored nodes, input labels elsewhere.
inline Tree<NodeLabel> relabel_output(const Tree<NodeLabel>& input, const Prediction& p) {
  return input.map_labels([&](NodeId u, const NodeLabel& l) -> NodeLabel {
    if (u < p.node_classes.size() && p.node_classes[u]) return CategoricalLabel{p.node_classes[u]->label};
    return l;
  });
}

/// Same skeleton; dropped nodes carry `null_value`.
template <class Label>
Tree<Label> prune_output(const Tree<Label>& input, const Prediction& p, const Label& null_value) {
  return input.map_labels([&](NodeId u, const Label& l) -> Label { return p.keep[u] ? l : null_value; });
}

inline Tree<NodeLabel> prune_output(const Tree<NodeLabel>& input, const Prediction& p) {
  return prune_output(input, p, NodeLabel{NullLabel{}});
}

/// Labels of kept leaves, left to right.
template <class Label>
std::vector<Label> compressed_sequence(const Tree<Label>& tokens, const Prediction& p) {
  std::vector<Label> out;
  for (NodeId u : tokens.leaves())
    if (p.keep[u]) out.push_back(tokens.label(u));
  return out;
}

/// One record per tree: a header line, then one `node<TAB>value` line per
/// decision, then a blank line. Tree-level classes use node id 0.
inline void write_prediction_record(std::ostream& out, const std::string& tree_id, const Prediction& p,
                                    const std::function<std::string(std::size_t)>& class_name) {
  out << "#tree\t" << tree_id << '\t' << to_string(p.kind) << '\n';
  switch (p.kind) {
    case TaskKind::supersource: out << 0 << '\t' << class_name(p.tree_class->label) << '\n'; break;
    case TaskKind::relabel:
      for (std::size_t u = 1; u < p.node_classes.size(); ++u)
        if (p.node_classes[u]) out << u << '\t' << class_name(p.node_classes[u]->label) << '\n';
      break;
    case TaskKind::prune:
      for (std::size_t u = 1; u < p.keep.size(); ++u) out << u << '\t' << (p.keep[u] ? 1 : 0) << '\n';
      break;
  }
  out << '\n';
}

}  // namespace treelstm
