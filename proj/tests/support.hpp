#pragma once

// Test-only helpers: random and exhaustive tree generators and a plain
// sequence LSTM used as an independent oracle for chain-shaped trees.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "treelstm/rng.hpp"
#include "treelstm/tree.hpp"

namespace treelstm::testing {

/// Random tree with `n` nodes: node k (k >= 2) attaches to a uniformly
/// chosen earlier node with spare capacity.
inline Tree<std::string> random_tree(Rng& rng, std::size_t n, std::size_t max_outdegree = 3,
                                     std::size_t alphabet = 4) {
  RawTree<std::string> raw;
  std::vector<std::size_t> degree(n + 1, 0);
  raw.nodes.emplace_back(1, "s" + std::to_string(rng.index(alphabet)));
  for (std::size_t k = 2; k <= n; ++k) {
    std::vector<std::size_t> open;
    for (std::size_t p = 1; p < k; ++p)
      if (degree[p] < max_outdegree) open.push_back(p);
    const std::size_t p = open[rng.index(open.size())];
    ++degree[p];
    raw.nodes.emplace_back(k, "s" + std::to_string(rng.index(alphabet)));
    raw.edges.emplace_back(p, k);
  }
  return validate(raw, max_outdegree);
}

/// Chain root -> ... -> leaf of length n.
inline Tree<std::string> chain(std::size_t n) {
  RawTree<std::string> raw;
  for (std::size_t k = 1; k <= n; ++k) {
    raw.nodes.emplace_back(k, "n" + std::to_string(k));
    if (k > 1) raw.edges.emplace_back(k - 1, k);
  }
  return validate(raw);
}

namespace detail {

// Every ordered forest with exactly `n` nodes, as lists of child-subtrees.
struct Shape {
  std::vector<Shape> children;
};

inline std::vector<std::vector<Shape>> forests(std::size_t n);

inline std::vector<Shape> trees(std::size_t n) {
  std::vector<Shape> out;
  if (n == 0) return out;
  for (auto& f : forests(n - 1)) out.push_back(Shape{std::move(f)});
  return out;
}

inline std::vector<std::vector<Shape>> forests(std::size_t n) {
  if (n == 0) return {{}};
  std::vector<std::vector<Shape>> out;
  for (std::size_t first = 1; first <= n; ++first)
    for (const auto& t : trees(first))
      for (auto rest : forests(n - first)) {
        rest.insert(rest.begin(), t);
        out.push_back(std::move(rest));
      }
  return out;
}

inline void emit(const Shape& s, std::size_t parent, RawTree<int>& raw) {
  const std::size_t id = raw.nodes.size() + 1;
  raw.nodes.emplace_back(id, 0);
  if (parent) raw.edges.emplace_back(parent, id);
  for (const auto& c : s.children) emit(c, id, raw);
}

}  // namespace detail

/// All ordered rooted trees with exactly n nodes (Catalan(n - 1) of them).
inline std::vector<Tree<int>> all_ordered_trees(std::size_t n) {
  std::vector<Tree<int>> out;
  for (const auto& s : detail::trees(n)) {
    RawTree<int> raw;
    detail::emit(s, 0, raw);
    out.push_back(validate(raw));
  }
  return out;
}

/// Brute force: does some permutation of node ids map the edge set of a
/// exactly onto the edge set of b?
template <class A, class B>
bool bijection_exists(const Tree<A>& a, const Tree<B>& b) {
  if (a.size() != b.size()) return false;
  const std::size_t n = a.size();
  std::vector<std::vector<bool>> eb(n + 1, std::vector<bool>(n + 1, false));
  for (NodeId u = 1; u <= n; ++u)
    for (NodeId c : b.children(u)) eb[u][c] = true;
  std::vector<std::pair<NodeId, NodeId>> ea;
  for (NodeId u = 1; u <= n; ++u)
    for (NodeId c : a.children(u)) ea.emplace_back(u, c);
  std::vector<NodeId> f(n + 1);
  for (NodeId u = 0; u <= n; ++u) f[u] = u;
  do {
    bool ok = true;
    for (auto [u, c] : ea)
      if (!eb[f[u]][f[c]]) {
        ok = false;
        break;
      }
    if (ok) return true;
  } while (std::next_permutation(f.begin() + 1, f.end()));
  return false;
}

/// Edit distance by memoized recursion over suffixes, trying every
/// alignment step (delete, insert, match or substitute).
template <class T>
std::size_t edit_distance_oracle(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<std::vector<std::size_t>> memo(a.size() + 1, std::vector<std::size_t>(b.size() + 1, SIZE_MAX));
  auto go = [&](auto&& self, std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto& m = memo[i][j];
    if (m != SIZE_MAX) return m;
    m = std::min({self(self, i + 1, j) + 1, self(self, i, j + 1) + 1, self(self, i + 1, j + 1) + (a[i] != b[j])});
    return m;
  };
  return go(go, 0, 0);
}

/// Every sequence over {0..alphabet-1} of length <= max_len.
inline std::vector<std::vector<int>> all_sequences(std::size_t max_len, int alphabet) {
  std::vector<std::vector<int>> out{{}};
  for (std::size_t start = 0; start < out.size(); ++start) {
    if (out[start].size() == max_len) continue;
    for (int s = 0; s < alphabet; ++s) {
      auto next = out[start];
      next.push_back(s);
      out.push_back(std::move(next));
    }
  }
  return out;
}

/// Standard LSTM over a sequence, from first principles.
struct SeqLstm {
  std::size_t hidden = 0, input = 0;
  // gate order r (candidate), i, o, f
  std::vector<std::vector<double>> W[4], U[4];
  std::vector<double> b[4];

  struct Step {
    std::vector<double> h, c;
  };

  std::vector<Step> run(const std::vector<std::vector<double>>& xs) const {
    std::vector<Step> out;
    std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
    for (const auto& x : xs) {
      std::vector<double> a[4];
      for (int g = 0; g < 4; ++g) {
        a[g].resize(hidden);
        for (std::size_t r = 0; r < hidden; ++r) {
          double s = b[g][r];
          for (std::size_t k = 0; k < input; ++k) s += W[g][r][k] * x[k];
          for (std::size_t k = 0; k < hidden; ++k) s += U[g][r][k] * h[k];
          a[g][r] = g == 0 ? std::tanh(s) : 1.0 / (1.0 + std::exp(-s));
        }
      }
      for (std::size_t r = 0; r < hidden; ++r) {
        c[r] = a[1][r] * a[0][r] + a[3][r] * c[r];
        h[r] = a[2][r] * std::tanh(c[r]);
      }
      out.push_back({h, c});
    }
    return out;
  }
};

}  // namespace treelstm::testing
