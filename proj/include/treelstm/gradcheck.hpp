#pragma once

// Finite-difference verification of a full model (inputs, cell, head and
// L2 term) on small random trees.

#include <cstdint>
#include <string>
#include <vector>

#include "treelstm/autodiff.hpp"
#include "treelstm/labels.hpp"
#include "treelstm/model.hpp"
#include "treelstm/rng.hpp"
#include "treelstm/training.hpp"

namespace treelstm {

struct GradCheckCase {
  Model model;
  std::vector<Example> examples;
};

namespace detail {

// Node k attaches to a uniformly chosen earlier node with spare capacity.
inline Tree<std::string> small_random_tree(Rng& rng, std::size_t n, std::size_t max_outdegree) {
  RawTree<std::string> raw;
  std::vector<std::size_t> degree(n + 1, 0);
  raw.nodes.emplace_back(1, "");
  for (std::size_t k = 2; k <= n; ++k) {
    std::vector<std::size_t> open;
    for (std::size_t p = 1; p < k; ++p)
      if (degree[p] < max_outdegree) open.push_back(p);
    const std::size_t p = open[rng.index(open.size())];
    ++degree[p];
    raw.nodes.emplace_back(k, "");
    raw.edges.emplace_back(p, k);
  }
  return validate(raw, max_outdegree);
}

}  // namespace detail

/// Random trees of 1..max_nodes nodes: categorical internal labels, dense
/// leaf vectors, random targets for the given task.
inline GradCheckCase make_gradcheck_case(CellKind cell, TaskKind task, std::size_t trees, std::size_t max_nodes,
                                         std::uint64_t seed, std::size_t hidden = 4) {
  constexpr std::size_t kArity = 3, kDense = 2, kClasses = 3;
  Rng rng(seed);
  EmbeddingTable table(kDense);
  for (int w = 0; w < 6; ++w) {
    std::vector<double> v(kDense);
    for (double& x : v) x = rng.uniform(-1, 1);
    table.insert("w" + std::to_string(w), v);
  }
  Vocabulary vocab;
  for (const char* s : {"a", "b", "c", "d"}) vocab.add(s);

  ModelConfig cfg;
  cfg.cell = cell;
  cfg.hidden = hidden;
  cfg.input_dim = 3;
  cfg.arity = kArity;
  cfg.dense_dim = kDense;
  cfg.task.kind = task;
  cfg.task.classes = kClasses;
  cfg.task.mask = MaskPolicy::all;
  GradCheckCase out{Model::create(cfg, vocab, task == TaskKind::prune ? std::vector<std::string>{}
                                                                       : numbered_class_names(kClasses),
                                  rng.next()),
                    {}};
  for (std::size_t t = 0; t < trees; ++t) {
    const auto shape = detail::small_random_tree(rng, 1 + rng.index(max_nodes), kArity);
    const auto tokens = shape.map_labels([&](NodeId u, const std::string&) {
      return shape.is_leaf(u) ? "w" + std::to_string(rng.index(6)) : vocab.symbol(1 + rng.index(4));
    });
    Example ex{featurize(tokens, vocab, &table), tokens, {}};
    const std::size_t n = tokens.size();
    switch (task) {
      case TaskKind::supersource: ex.target.tree_class = rng.index(kClasses); break;
      case TaskKind::relabel:
        ex.target.node_class.assign(n + 1, std::nullopt);
        for (NodeId u = 1; u <= n; ++u) ex.target.node_class[u] = rng.index(kClasses);
        break;
      case TaskKind::prune:
        ex.target.keep.assign(n + 1, 0.0);
        for (NodeId u = 1; u <= n; ++u) ex.target.keep[u] = static_cast<double>(rng.index(2));
        break;
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

/// Per-tree regularized loss checked against central differences; the
/// report keeps the worst tree.
inline GradCheckReport check_gradients(GradCheckCase& c, double lambda = 1e-4, double step = 1e-5,
                                       double tolerance = 1e-4, Fault fault = Fault::none) {
  const auto params = c.model.parameters();
  GradCheckReport worst;
  worst.tolerance = tolerance;
  for (const Example& ex : c.examples) {
    auto build = [&](Graph& g) {
      return regularized_loss(g, task_loss(g, c.model.config.task, forward(g, c.model, ex.input), ex.target), params,
                              lambda);
    };
    auto r = finite_difference_check(params, build, step, tolerance, fault);
    if (worst.entries.empty() || r.max_rel_error > worst.max_rel_error) worst = std::move(r);
  }
  return worst;
}

}  // namespace treelstm
