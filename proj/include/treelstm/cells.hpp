#pragma once

// Top-down, Child-Sum and N-ary TreeLSTM cells and the encoder that unfolds
// a cell over a tree.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "treelstm/autodiff.hpp"
#include "treelstm/error.hpp"
#include "treelstm/rng.hpp"
#include "treelstm/tree.hpp"

namespace treelstm {

/// Hidden and memory-cell vectors of one node, both (H, 1).
struct NodeState {
  Var h;
  Var c;
};

/// Gate values of one cell evaluation: candidate r, input i, output o and
/// one forget gate per child (a single one for the top-down cell).
struct GateActivations {
  Var r, i, o;
  std::vector<Var> f;
};

struct ChildState {
  NodeId id;
  NodeState state;
};

/// Gate order used by every parameter bundle.
enum Gate : std::size_t { kCandidate = 0, kInput = 1, kOutput = 2, kForget = 3 };
inline constexpr std::array<const char*, 4> kGateNames{"r", "i", "o", "f"};

enum class CellKind { td, childsum, nary };

inline std::string to_string(CellKind k) {
  switch (k) {
    case CellKind::td: return "td";
    case CellKind::childsum: return "childsum";
    case CellKind::nary: return "nary";
  }
  return "?";
}

inline Direction cell_direction(CellKind k) { return k == CellKind::td ? Direction::top_down : Direction::bottom_up; }

namespace detail {

// Weights uniform in (-1/sqrt(H), 1/sqrt(H)); biases zero.
inline Parameter weight(std::string name, std::size_t rows, std::size_t cols, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return Parameter(std::move(name), std::move(t), true);
}

inline Parameter bias(std::string name, std::size_t rows) { return Parameter(std::move(name), Tensor(rows, 1), false); }

}  // namespace detail

/// W (H, d), U (H, H), b (H, 1) per gate; U is applied to the parent's h.
struct TDCellParams {
  std::size_t hidden = 0;
  std::size_t input = 0;
  std::array<Parameter, 4> W, U, b;

  static TDCellParams create(std::size_t hidden, std::size_t input, Rng& rng) {
    TDCellParams p;
    p.hidden = hidden;
    p.input = input;
    for (std::size_t g = 0; g < 4; ++g) {
      const std::string s = kGateNames[g];
      p.W[g] = detail::weight("td.W_" + s, hidden, input, hidden, rng);
      p.U[g] = detail::weight("td.U_" + s, hidden, hidden, hidden, rng);
      p.b[g] = detail::bias("td.b_" + s, hidden);
    }
    return p;
  }

  template <class F>
  void for_each_parameter(F&& f) {
    for (std::size_t g = 0; g < 4; ++g) {
      f(W[g]);
      f(U[g]);
      f(b[g]);
    }
  }
};

/// Same roster as the TD cell; U_f is shared by every child's forget gate.
struct ChildSumCellParams {
  std::size_t hidden = 0;
  std::size_t input = 0;
  std::array<Parameter, 4> W, U, b;

  static ChildSumCellParams create(std::size_t hidden, std::size_t input, Rng& rng) {
    ChildSumCellParams p;
    p.hidden = hidden;
    p.input = input;
    for (std::size_t g = 0; g < 4; ++g) {
      const std::string s = kGateNames[g];
      p.W[g] = detail::weight("childsum.W_" + s, hidden, input, hidden, rng);
      p.U[g] = detail::weight("childsum.U_" + s, hidden, hidden, hidden, rng);
      p.b[g] = detail::bias("childsum.b_" + s, hidden);
    }
    return p;
  }

  template <class F>
  void for_each_parameter(F&& f) {
    for (std::size_t g = 0; g < 4; ++g) {
      f(W[g]);
      f(U[g]);
      f(b[g]);
    }
  }
};

/// Positional parameters for arity N: U[g][l] for the r, i, o gates and
/// U_f[k][l] coupling child l's hidden state into child k's forget gate.
struct NaryCellParams {
  std::size_t hidden = 0;
  std::size_t input = 0;
  std::size_t arity = 0;
  std::array<Parameter, 4> W, b;
  std::array<std::vector<Parameter>, 3> U;  // r, i, o; each of length N
  std::vector<std::vector<Parameter>> U_f;  // N x N

  static NaryCellParams create(std::size_t hidden, std::size_t input, std::size_t arity, Rng& rng) {
    if (arity == 0) throw Error(Errc::arity_exceeded, "N-ary cell needs arity >= 1");
    NaryCellParams p;
    p.hidden = hidden;
    p.input = input;
    p.arity = arity;
    for (std::size_t g = 0; g < 4; ++g) {
      const std::string s = kGateNames[g];
      p.W[g] = detail::weight("nary.W_" + s, hidden, input, hidden, rng);
      if (g != kForget) {
        for (std::size_t l = 0; l < arity; ++l)
          p.U[g].push_back(detail::weight("nary.U_" + s + "_" + std::to_string(l + 1), hidden, hidden, hidden, rng));
      }
    }
    p.U_f.resize(arity);
    for (std::size_t k = 0; k < arity; ++k)
      for (std::size_t l = 0; l < arity; ++l)
        p.U_f[k].push_back(detail::weight("nary.U_f_" + std::to_string(k + 1) + "_" + std::to_string(l + 1), hidden,
                                          hidden, hidden, rng));
    for (std::size_t g = 0; g < 4; ++g) p.b[g] = detail::bias(std::string("nary.b_") + kGateNames[g], hidden);
    return p;
  }

  template <class F>
  void for_each_parameter(F&& f) {
    for (std::size_t g = 0; g < 4; ++g) {
      f(W[g]);
      if (g != kForget)
        for (auto& u : U[g]) f(u);
    }
    for (auto& row : U_f)
      for (auto& u : row) f(u);
    for (auto& bias : b) f(bias);
  }
};

/// Parameters bound as leaves of one graph.
struct TDCellVars {
  std::size_t hidden = 0;
  std::array<Var, 4> W, U, b;
};
struct ChildSumCellVars {
  std::size_t hidden = 0;
  std::array<Var, 4> W, U, b;
};
struct NaryCellVars {
  std::size_t hidden = 0;
  std::size_t arity = 0;
  std::array<Var, 4> W, b;
  std::array<std::vector<Var>, 3> U;
  std::vector<std::vector<Var>> U_f;
};

inline TDCellVars bind(Graph& g, TDCellParams& p) {
  TDCellVars v;
  v.hidden = p.hidden;
  for (std::size_t k = 0; k < 4; ++k) {
    v.W[k] = g.parameter(p.W[k]);
    v.U[k] = g.parameter(p.U[k]);
    v.b[k] = g.parameter(p.b[k]);
  }
  return v;
}

inline ChildSumCellVars bind(Graph& g, ChildSumCellParams& p) {
  ChildSumCellVars v;
  v.hidden = p.hidden;
  for (std::size_t k = 0; k < 4; ++k) {
    v.W[k] = g.parameter(p.W[k]);
    v.U[k] = g.parameter(p.U[k]);
    v.b[k] = g.parameter(p.b[k]);
  }
  return v;
}

inline NaryCellVars bind(Graph& g, NaryCellParams& p) {
  NaryCellVars v;
  v.hidden = p.hidden;
  v.arity = p.arity;
  for (std::size_t k = 0; k < 4; ++k) {
    v.W[k] = g.parameter(p.W[k]);
    v.b[k] = g.parameter(p.b[k]);
    if (k != kForget)
      for (auto& u : p.U[k]) v.U[k].push_back(g.parameter(u));
  }
  v.U_f.resize(p.arity);
  for (std::size_t k = 0; k < p.arity; ++k)
    for (auto& u : p.U_f[k]) v.U_f[k].push_back(g.parameter(u));
  return v;
}

namespace detail {

inline void require_input(const Graph& g, Var x, Var w) {
  const Tensor& X = g.value(x);
  const Tensor& W = g.value(w);
  if (X.cols() != 1 || X.rows() != W.cols())
    throw Error(Errc::shape_mismatch, "cell input expected (" + std::to_string(W.cols()) + ", 1), got " +
                                          X.shape_string());
}

inline void require_state(const Graph& g, const NodeState& s, std::size_t hidden) {
  for (Var v : {s.h, s.c}) {
    const Tensor& t = g.value(v);
    if (t.rows() != hidden || t.cols() != 1)
      throw Error(Errc::shape_mismatch, "state expected (" + std::to_string(hidden) + ", 1), got " +
                                            t.shape_string());
  }
}

inline Var activate(Graph& g, std::size_t gate, Var pre) {
  return gate == kCandidate ? g.tanh(pre) : g.sigmoid(pre);
}

}  // namespace detail

/// Top-down cell: every gate reads the node input and the parent's h;
/// c = i*r + f*c_parent, h = o*tanh(c). Pass nullopt at the root.
inline NodeState td_cell(Graph& g, const TDCellVars& p, Var x, const std::optional<NodeState>& parent,
                         GateActivations* gates = nullptr) {
  detail::require_input(g, x, p.W[0]);
  if (parent) detail::require_state(g, *parent, p.hidden);
  std::array<Var, 4> act;
  for (std::size_t k = 0; k < 4; ++k) {
    Var pre = g.affine(p.W[k], x, p.b[k]);
    if (parent) pre = g.add(pre, g.matvec(p.U[k], parent->h));
    act[k] = detail::activate(g, k, pre);
  }
  Var c = g.mul(act[kInput], act[kCandidate]);
  if (parent) c = g.add(c, g.mul(act[kForget], parent->c));
  Var h = g.mul(act[kOutput], g.tanh(c));
  if (gates) *gates = {act[kCandidate], act[kInput], act[kOutput], {act[kForget]}};
  return {h, c};
}


/// Child-Sum cell. Children are summed in ascending id order whatever the
/// order of `children`, so permuting the list leaves the result bit-identical.
inline NodeState childsum_cell(Graph& g, const ChildSumCellVars& p, Var x, std::span<const ChildState> children,
                               GateActivations* gates = nullptr) {
  detail::require_input(g, x, p.W[0]);
  std::vector<ChildState> sorted(children.begin(), children.end());
  std::sort(sorted.begin(), sorted.end(), [](const ChildState& a, const ChildState& b) { return a.id < b.id; });
  for (const auto& ch : sorted) detail::require_state(g, ch.state, p.hidden);

  std::vector<Var> hs;
  hs.reserve(sorted.size());
  for (const auto& ch : sorted) hs.push_back(ch.state.h);
  const bool leaf = sorted.empty();
  Var h_sum = g.sum_list(hs, p.hidden);

  std::array<Var, 4> base;  // W x + b
  for (std::size_t k = 0; k < 4; ++k) base[k] = g.affine(p.W[k], x, p.b[k]);

  std::array<Var, 3> act;
  for (std::size_t k = 0; k < 3; ++k) {
    Var pre = leaf ? base[k] : g.add(base[k], g.matvec(p.U[k], h_sum));
    act[k] = detail::activate(g, k, pre);
  }
  std::vector<Var> terms{g.mul(act[kInput], act[kCandidate])};
  std::vector<Var> forget;
  for (const auto& ch : sorted) {
    Var f = g.sigmoid(g.add(base[kForget], g.matvec(p.U[kForget], ch.state.h)));
    forget.push_back(f);
    terms.push_back(g.mul(f, ch.state.c));
  }
  Var c = terms.size() == 1 ? terms.front() : g.sum_list(terms, p.hidden);
  Var h = g.mul(act[kOutput], g.tanh(c));
  if (gates) *gates = {act[kCandidate], act[kInput], act[kOutput], std::move(forget)};
  return {h, c};
}

/// N-ary cell over exactly N positional slots; absent slots contribute
/// zero to every sum (their forget gates multiply a zero memory cell).
inline NodeState nary_cell(Graph& g, const NaryCellVars& p, Var x, std::span<const std::optional<NodeState>> slots,
                           GateActivations* gates = nullptr) {
  detail::require_input(g, x, p.W[0]);
  if (slots.size() > p.arity)
    throw Error(Errc::arity_exceeded, std::to_string(slots.size()) + " child slots for arity " +
                                          std::to_string(p.arity));
  for (const auto& s : slots)
    if (s) detail::require_state(g, *s, p.hidden);

  std::array<Var, 4> base;
  for (std::size_t k = 0; k < 4; ++k) base[k] = g.affine(p.W[k], x, p.b[k]);

  std::array<Var, 3> act;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<Var> terms{base[k]};
    for (std::size_t l = 0; l < slots.size(); ++l)
      if (slots[l]) terms.push_back(g.matvec(p.U[k][l], slots[l]->h));
    Var pre = terms.size() == 1 ? terms.front() : g.sum_list(terms, p.hidden);
    act[k] = detail::activate(g, k, pre);
  }
  std::vector<Var> cterms{g.mul(act[kInput], act[kCandidate])};
  std::vector<Var> forget;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (!slots[k]) continue;
    std::vector<Var> terms{base[kForget]};
    for (std::size_t l = 0; l < slots.size(); ++l)
      if (slots[l]) terms.push_back(g.matvec(p.U_f[k][l], slots[l]->h));
    Var f = g.sigmoid(g.sum_list(terms, p.hidden));
    forget.push_back(f);
    cterms.push_back(g.mul(f, slots[k]->c));
  }
  Var c = cterms.size() == 1 ? cterms.front() : g.sum_list(cterms, p.hidden);
  Var h = g.mul(act[kOutput], g.tanh(c));
  if (gates) *gates = {act[kCandidate], act[kInput], act[kOutput], std::move(forget)};
  return {h, c};
}

using CellParams = std::variant<TDCellParams, ChildSumCellParams, NaryCellParams>;
using CellVars = std::variant<TDCellVars, ChildSumCellVars, NaryCellVars>;

inline CellKind cell_kind(const CellParams& p) {
  return static_cast<CellKind>(p.index());
}

inline std::size_t cell_hidden(const CellParams& p) {
  return std::visit([](const auto& c) { return c.hidden; }, p);
}

inline CellVars bind(Graph& g, CellParams& p) {
  return std::visit([&](auto& c) -> CellVars { return bind(g, c); }, p);
}

template <class F>
void for_each_parameter(CellParams& p, F&& f) {
  std::visit([&](auto& c) { c.for_each_parameter(f); }, p);
}

inline CellParams make_cell(CellKind kind, std::size_t hidden, std::size_t input, std::size_t arity, Rng& rng) {
  switch (kind) {
    case CellKind::td: return TDCellParams::create(hidden, input, rng);
    case CellKind::childsum: return ChildSumCellParams::create(hidden, input, rng);
    case CellKind::nary: return NaryCellParams::create(hidden, input, arity, rng);
  }
  throw Error(Errc::bad_format, "unknown cell kind");
}

/// Unfolds the cell over the tree in schedule order. `inputs` is indexed
/// by NodeId (slot 0 unused). The result is indexed the same way.
template <class Label>
std::vector<NodeState> encode(Graph& g, const Tree<Label>& tree, const CellVars& cell, Direction direction,
                              std::span<const Var> inputs) {
  const bool td = std::holds_alternative<TDCellVars>(cell);
  if (td != (direction == Direction::top_down))
    throw Error(Errc::direction_mismatch, std::string(td ? "top-down cell" : "bottom-up cell") + " cannot run " +
                                              to_string(direction));
  if (inputs.size() != tree.size() + 1)
    throw Error(Errc::shape_mismatch, "expected " + std::to_string(tree.size()) + " node inputs");

  std::vector<NodeState> states(tree.size() + 1);
  const auto order = schedule(tree, direction);

  if (const auto* p = std::get_if<TDCellVars>(&cell)) {
    for (NodeId u : order) {
      std::optional<NodeState> parent;
      if (auto pa = tree.parent(u)) parent = states[*pa];
      states[u] = td_cell(g, *p, inputs[u], parent);
    }
  } else if (const auto* p = std::get_if<ChildSumCellVars>(&cell)) {
    std::vector<ChildState> children;
    for (NodeId u : order) {
      children.clear();
      for (NodeId c : tree.children(u)) children.push_back({c, states[c]});
      states[u] = childsum_cell(g, *p, inputs[u], children);
    }
  } else {
    const auto& np = std::get<NaryCellVars>(cell);
    std::vector<std::optional<NodeState>> slots(np.arity);
    for (NodeId u : order) {
      const auto ch = tree.children(u);
      if (ch.size() > np.arity)
        throw Error(Errc::arity_exceeded, "node " + std::to_string(u) + " has " + std::to_string(ch.size()) +
                                              " children, arity is " + std::to_string(np.arity));
      std::fill(slots.begin(), slots.end(), std::nullopt);
      for (std::size_t l = 0; l < ch.size(); ++l) slots[l] = states[ch[l]];
      states[u] = nary_cell(g, np, inputs[u], slots);
    }
  }
  return states;
}

}  // namespace treelstm
