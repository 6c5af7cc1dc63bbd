#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "treelstm/autodiff.hpp"
#include "treelstm/error.hpp"
#include "treelstm/rng.hpp"
#include "treelstm/tree.hpp"

namespace treelstm {

struct DenseLabel {
  std::vector<double> values;
  bool operator==(const DenseLabel&) const = default;
};
struct CategoricalLabel {
  std::size_t index = 0;
  bool operator==(const CategoricalLabel&) const = default;
};
/// Marks a node removed from a pruned output tree.
struct NullLabel {
  bool operator==(const NullLabel&) const = default;
};

using NodeLabel = std::variant<DenseLabel, CategoricalLabel, NullLabel>;

/// String symbols to dense indices. Index 0 is reserved for unknown symbols.
class Vocabulary {
 public:
  static constexpr const char* kUnknown = "<unk>";

  Vocabulary() : symbols_{kUnknown} { index_.emplace(kUnknown, 0); }

  explicit Vocabulary(const std::vector<std::string>& symbols) : Vocabulary() {
    for (std::size_t i = 1; i < symbols.size(); ++i) add(symbols[i]);
  }

  std::size_t add(const std::string& s) {
    auto [it, inserted] = index_.emplace(s, symbols_.size());
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  std::size_t index(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? 0 : it->second;
  }

  bool contains(const std::string& s) const { return index_.count(s) != 0; }
  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(std::size_t i) const { return symbols_.at(i); }
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// token -> vector of a fixed dimension; unknown tokens map to zeros.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  bool contains(const std::string& token) const { return table_.count(token) != 0; }

  void insert(const std::string& token, std::vector<double> v) {
    if (v.size() != dim_)
      throw Error(Errc::dimension_mismatch, "embedding for '" + token + "' has dimension " +
                                                std::to_string(v.size()) + ", expected " + std::to_string(dim_));
    if (!table_.emplace(token, std::move(v)).second) throw Error(Errc::duplicate_token, token);
  }

  std::vector<double> lookup(const std::string& token) const {
    auto it = table_.find(token);
    return it == table_.end() ? std::vector<double>(dim_, 0.0) : it->second;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

/// Maps string labels to NodeLabels: leaves become dense embeddings when a
/// table is supplied, everything else becomes a vocabulary index.
inline Tree<NodeLabel> featurize(const Tree<std::string>& tree, const Vocabulary& vocab,
                                 const EmbeddingTable* embeddings = nullptr) {
  return tree.map_labels([&](NodeId u, const std::string& s) -> NodeLabel {
    if (embeddings && tree.is_leaf(u)) return DenseLabel{embeddings->lookup(s)};
    return CategoricalLabel{vocab.index(s)};
  });
}

/// Per-kind affine projections into the common cell input dimension:
/// categorical x = E[:, k] + b_cat, dense x = P v + b_dense.
struct InputLayer {
  std::size_t input_dim = 0;
  std::size_t categories = 0;
  std::size_t dense_dim = 0;  // 0 when no dense labels are used
  Parameter E, b_cat, P, b_dense;

  static InputLayer create(std::size_t input_dim, std::size_t categories, std::size_t dense_dim, Rng& rng) {
    InputLayer layer;
    layer.input_dim = input_dim;
    layer.categories = categories;
    layer.dense_dim = dense_dim;
    Tensor e(input_dim, categories);
    for (double& v : e.values()) v = rng.uniform(-1.0, 1.0);
    layer.E = Parameter("input.E", std::move(e), true);
    layer.b_cat = Parameter("input.b_cat", Tensor(input_dim, 1), false);
    if (dense_dim > 0) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dense_dim));
      Tensor p(input_dim, dense_dim);
      for (double& v : p.values()) v = rng.uniform(-bound, bound);
      layer.P = Parameter("input.P", std::move(p), true);
      layer.b_dense = Parameter("input.b_dense", Tensor(input_dim, 1), false);
    }
    return layer;
  }

  template <class F>
  void for_each_parameter(F&& f) {
    f(E);
    f(b_cat);
    if (dense_dim > 0) {
      f(P);
      f(b_dense);
    }
  }

  /// Input vectors indexed by NodeId (slot 0 unused).
  std::vector<Var> apply(Graph& g, const Tree<NodeLabel>& tree) {
    Var e = g.parameter(E);
    Var bc = g.parameter(b_cat);
    std::optional<Var> p, bd;
    if (dense_dim > 0) {
      p = g.parameter(P);
      bd = g.parameter(b_dense);
    }
    std::vector<Var> out(tree.size() + 1);
    for (NodeId u = 1; u <= tree.size(); ++u) {
      const NodeLabel& label = tree.label(u);
      if (const auto* cat = std::get_if<CategoricalLabel>(&label)) {
        if (cat->index >= categories)
          throw Error(Errc::label_out_of_range, "category " + std::to_string(cat->index) + " >= " +
                                                    std::to_string(categories));
        out[u] = g.add(g.column(e, cat->index), bc);
      } else if (const auto* dense = std::get_if<DenseLabel>(&label)) {
        if (!p || dense->values.size() != dense_dim)
          throw Error(Errc::dimension_mismatch, "dense label of dimension " + std::to_string(dense->values.size()) +
                                                    ", model expects " + std::to_string(dense_dim));
        out[u] = g.affine(*p, g.constant(Tensor::column(dense->values)), *bd);
      } else {
        throw Error(Errc::label_out_of_range, "NULL label on an input tree (node " + std::to_string(u) + ")");
      }
    }
    return out;
  }
};

}  // namespace treelstm
