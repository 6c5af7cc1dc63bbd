#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "treelstm/data_io.hpp"
#include "treelstm/tree.hpp"

using namespace treelstm;
using treelstm::testing::random_tree;

namespace {

Errc error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::bad_format;
}

}  // namespace

TEST(Validate, SingleNode) {
  RawTree<std::string> raw{{{7, "x"}}, {}};
  auto t = validate(raw);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.root(), 1u);
  EXPECT_FALSE(t.parent(1));
  EXPECT_EQ(t.label(1), "x");
}

TEST(Validate, TwoCycle) {
  RawTree<int> raw{{{1, 0}, {2, 0}}, {{1, 2}, {2, 1}}};
  EXPECT_EQ(error_of([&] { validate(raw); }), Errc::cycle_detected);
}

TEST(Validate, CycleBesideRoot) {
  RawTree<int> raw{{{1, 0}, {2, 0}, {3, 0}}, {{2, 3}, {3, 2}}};
  EXPECT_EQ(error_of([&] { validate(raw); }), Errc::cycle_detected);
}

TEST(Validate, OutdegreeExceeded) {
  RawTree<int> raw{{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}}, {{1, 2}, {1, 3}, {1, 4}, {1, 5}}};
  EXPECT_EQ(error_of([&] { validate(raw, 3); }), Errc::outdegree_exceeded);
  EXPECT_NO_THROW(validate(raw, 4));
}

TEST(Validate, MultipleRoots) {
  RawTree<int> raw{{{1, 0}, {2, 0}}, {}};
  EXPECT_EQ(error_of([&] { validate(raw); }), Errc::multiple_roots);
}

TEST(Validate, InconsistentEdges) {
  RawTree<int> two_parents{{{1, 0}, {2, 0}, {3, 0}}, {{1, 3}, {2, 3}, {1, 2}}};
  EXPECT_EQ(error_of([&] { validate(two_parents); }), Errc::inconsistent_edges);
  RawTree<int> dangling{{{1, 0}}, {{1, 9}}};
  EXPECT_EQ(error_of([&] { validate(dangling); }), Errc::inconsistent_edges);
  RawTree<int> empty;
  EXPECT_EQ(error_of([&] { validate(empty); }), Errc::empty_tree);
}

TEST(Validate, RenumbersInPreorderWithRootFirst) {
  RawTree<std::string> raw{{{30, "c"}, {10, "root"}, {20, "b"}, {40, "d"}}, {{10, 20}, {20, 40}, {10, 30}}};
  auto t = validate(raw);
  EXPECT_EQ(t.label(1), "root");
  EXPECT_EQ(t.label(2), "b");
  EXPECT_EQ(t.label(3), "d");
  EXPECT_EQ(t.label(4), "c");
  EXPECT_EQ(*t.parent(3), 2u);
}

TEST(Validate, StructuralInvariantsOnRandomTrees) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto t = random_tree(rng, 1 + rng.index(25));
    EXPECT_EQ(t.edge_count(), t.size() - 1);
    for (NodeId u = 1; u <= t.size(); ++u) {
      for (NodeId c : t.children(u)) EXPECT_EQ(*t.parent(c), u);
      if (u != t.root()) {
        auto p = *t.parent(u);
        auto ch = t.children(p);
        EXPECT_NE(std::find(ch.begin(), ch.end(), u), ch.end());
      }
      EXPECT_LE(t.outdegree(u), 3u);
    }
  }
}

TEST(Skeleton, LabelsAreIrrelevant) {
  auto a = parse_bracketed("(S (NP a) (VP b))");
  auto b = parse_bracketed("(X (Y c) (Z d))");
  EXPECT_EQ(skeleton(a), skeleton(b));
  EXPECT_NE(a, b);
}

TEST(Skeleton, LeafAndChain) {
  auto leaf = skeleton(parse_bracketed("x"));
  EXPECT_EQ(leaf.node_count, 1u);
  EXPECT_TRUE(leaf.edges.empty());
  auto chain = skeleton(treelstm::testing::chain(3));
  std::vector<std::pair<NodeId, NodeId>> expected{{1, 2}, {2, 3}};
  EXPECT_EQ(chain.edges, expected);
}

TEST(Isomorphism, Identity) {
  Rng rng(5);
  auto t = random_tree(rng, 12);
  EXPECT_TRUE(is_isomorphic(t, t, true));
  EXPECT_TRUE(is_isomorphic(t, t, false));
}

TEST(Isomorphism, SiblingSwap) {
  auto a = parse_bracketed("(r (A x) (B (y z)))");
  auto b = parse_bracketed("(r (B (y z)) (A x))");
  EXPECT_FALSE(is_isomorphic(a, b, true));
  EXPECT_TRUE(is_isomorphic(a, b, false));
}

TEST(Isomorphism, SkeletonEqualityMatchesOrderedMode) {
  Rng rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(6);
    auto a = random_tree(rng, n);
    auto b = random_tree(rng, n);
    EXPECT_EQ(skeleton(a) == skeleton(b), is_isomorphic(a, b, true));
    if (is_isomorphic(a, b, true)) {
      EXPECT_TRUE(is_isomorphic(a, b, false));
    }
  }
}

TEST(Isomorphism, AgreesWithBruteForceUpToSixNodes) {
  // The acceptance suite covers 7 nodes; 6 keeps the unit run short.
  for (std::size_t n = 1; n <= 6; ++n) {
    auto all = treelstm::testing::all_ordered_trees(n);
    for (const auto& a : all)
      for (const auto& b : all) ASSERT_EQ(is_isomorphic(a, b, false), treelstm::testing::bijection_exists(a, b));
  }
}

TEST(Schedule, Chain) {
  auto t = treelstm::testing::chain(3);
  EXPECT_EQ(schedule(t, Direction::top_down), (std::vector<NodeId>{1, 2, 3}));
  EXPECT_EQ(schedule(t, Direction::bottom_up), (std::vector<NodeId>{3, 2, 1}));
}

TEST(Schedule, PrecedenceOnRandomTrees) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    auto t = random_tree(rng, 1 + rng.index(20));
    for (auto dir : {Direction::top_down, Direction::bottom_up}) {
      auto order = schedule(t, dir);
      ASSERT_EQ(order.size(), t.size());
      std::vector<std::size_t> pos(t.size() + 1, 0);
      std::set<NodeId> seen(order.begin(), order.end());
      EXPECT_EQ(seen.size(), t.size());
      for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;
      for (NodeId u = 2; u <= t.size(); ++u) {
        const NodeId p = *t.parent(u);
        if (dir == Direction::top_down) {
          EXPECT_LT(pos[p], pos[u]);
        } else {
          EXPECT_GT(pos[p], pos[u]);
        }
      }
      EXPECT_EQ(order, schedule(t, dir));
    }
  }
}

TEST(Tree, PermuteChildrenKeepsIds) {
  auto t = parse_bracketed("(r a b c)");
  std::vector<std::size_t> perm{2, 0, 1};
  auto p = t.with_children_permuted(1, perm);
  EXPECT_EQ(p.children(1)[0], 4u);
  EXPECT_EQ(p.label(4), "c");
  EXPECT_TRUE(is_isomorphic(t, p, false));
}

TEST(Tree, ReplaceSubtreeMapsIds) {
  auto t = parse_bracketed("(r (x a b) (y c))");
  auto sub = parse_bracketed("(z d e f)");
  auto [out, map] = t.replace_subtree(2, sub);
  EXPECT_EQ(serialize(out), "(r (z d e f) (y c))");
  EXPECT_EQ(map[2], 0u);
  EXPECT_EQ(out.label(map[5]), "y");
  EXPECT_EQ(out.label(map[6]), "c");
}
