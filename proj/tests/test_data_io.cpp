#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "support.hpp"
#include "treelstm/data_io.hpp"

using namespace treelstm;
using treelstm::testing::random_tree;

namespace {

template <class T>
Errc code_of(T&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::bad_format;
}

}  // namespace

TEST(ParseBracketed, SmallParseTree) {
  auto t = parse_bracketed("(S (NP a) (VP b))");
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t.label(t.root()), "S");
  std::vector<std::string> leaves;
  for (NodeId u : t.leaves()) leaves.push_back(t.label(u));
  EXPECT_EQ(leaves, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.label(t.children(1)[0]), "NP");
  EXPECT_EQ(t.label(t.children(1)[1]), "VP");
}

TEST(ParseBracketed, Errors) {
  EXPECT_EQ(code_of([] { parse_bracketed("(("); }), Errc::unbalanced_parens);
  EXPECT_EQ(code_of([] { parse_bracketed("(a b))"); }), Errc::unbalanced_parens);
  EXPECT_EQ(code_of([] { parse_bracketed("   "); }), Errc::empty_tree);
  EXPECT_EQ(code_of([] { parse_bracketed(""); }), Errc::empty_tree);
  EXPECT_EQ(code_of([] { parse_bracketed("(a b\\q)"); }), Errc::escape_error);
  EXPECT_EQ(code_of([] { parse_bracketed("()"); }), Errc::bad_format);
  EXPECT_EQ(code_of([] { parse_bracketed("(a b) c"); }), Errc::bad_format);
  EXPECT_EQ(code_of([] { parse_bracketed("(a b c d)", 2); }), Errc::outdegree_exceeded);
}

TEST(ParseBracketed, Escapes) {
  auto t = parse_bracketed("(\\(x\\) a\\\\b -LRB-)");
  EXPECT_EQ(t.label(1), "(x)");
  EXPECT_EQ(t.label(2), "a\\b");
  EXPECT_EQ(serialize(t), "(\\(x\\) a\\\\b -LRB-)");
}

TEST(ParseBracketed, WhitespaceIsFlexible) {
  EXPECT_EQ(parse_bracketed("  ( S\n\t(NP  a )(VP b) ) "), parse_bracketed("(S (NP a) (VP b))"));
}

TEST(ParseBracketed, RoundTripOnRandomTrees) {
  Rng rng(1);
  const std::vector<std::string> pool{"a", "NP", "(", ")", "\\", "x(y", "-NULL-", "é", "w\\)"};
  for (int trial = 0; trial < 1000; ++trial) {
    auto shape = random_tree(rng, 1 + rng.index(20), 4);
    auto t = shape.map_labels([&](NodeId, const std::string&) { return pool[rng.index(pool.size())]; });
    const std::string text = serialize(t);
    auto back = parse_bracketed(text);
    ASSERT_EQ(back, t) << text;
    ASSERT_EQ(serialize(back), text);
  }
}

TEST(Records, ParseAndFormat) {
  auto r = parse_record("2\t(S (NP a) b)\t(x (y z) w)");
  EXPECT_EQ(r.tree_class, 2u);
  ASSERT_TRUE(r.target);
  EXPECT_EQ(r.target->label(1), "x");
  EXPECT_EQ(format_record(r), "2\t(S (NP a) b)\t(x (y z) w)");
  auto s = parse_record("-\t(S a)");
  EXPECT_FALSE(s.tree_class);
  EXPECT_FALSE(s.target);
  EXPECT_EQ(format_record(s), "-\t(S a)");
}

TEST(Records, Errors) {
  EXPECT_EQ(code_of([] { parse_record("x\t(S a)"); }), Errc::bad_class);
  EXPECT_EQ(code_of([] { parse_record("(S a)"); }), Errc::bad_format);
  EXPECT_EQ(code_of([] { parse_record("-\t(S a b)\t(S a)"); }), Errc::skeleton_mismatch);
}

TEST(Records, CorpusRoundTrip) {
  auto corpus = synth_task(SynthKind::keyword_prune, 30, 2);
  std::ostringstream out;
  write_corpus(out, corpus);
  std::istringstream in("# comment\n\n" + out.str());
  auto back = read_corpus(in);
  ASSERT_EQ(back.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(back[i].tree, corpus[i].tree);
    EXPECT_EQ(*back[i].target, *corpus[i].target);
  }
  std::istringstream empty("# nothing\n");
  EXPECT_EQ(code_of([&] { read_corpus(empty); }), Errc::empty_corpus);
}

TEST(InexStyle, Fixture) {
  auto c = load_inex_style(TREELSTM_FIXTURES "/inex_small.tsv");
  ASSERT_EQ(c.records.size(), 5u);
  std::vector<std::size_t> classes;
  for (const auto& [cls, tree] : c.records) classes.push_back(cls);
  EXPECT_EQ(classes, (std::vector<std::size_t>{0, 1, 2, 1, 0}));
  // Hand count of the fixture: two trees of class 0, two of class 1, one of class 2.
  std::map<std::size_t, int> hist;
  for (auto k : classes) ++hist[k];
  EXPECT_EQ(hist, (std::map<std::size_t, int>{{0, 2}, {1, 2}, {2, 1}}));
  EXPECT_EQ(c.class_count, 3u);
  EXPECT_EQ(c.label_alphabet, 10u);
  EXPECT_EQ(c.records[2].second.size(), 7u);
}

TEST(InexStyle, ThreeLinesAndErrors) {
  std::istringstream three("1\t(0 1 2)\n0\t3\n1\t(2 (1 0))\n");
  auto c = read_inex_style(three);
  ASSERT_EQ(c.records.size(), 3u);
  EXPECT_EQ(c.records[0].first, 1u);
  EXPECT_EQ(c.records[1].first, 0u);
  EXPECT_EQ(c.records[2].first, 1u);
  std::istringstream empty("");
  EXPECT_EQ(code_of([&] { read_inex_style(empty); }), Errc::empty_corpus);
  std::istringstream bad_class("x\t(0 1)\n");
  EXPECT_EQ(code_of([&] { read_inex_style(bad_class); }), Errc::bad_class);
  std::istringstream bad_tree("0\t(0 1\n");
  EXPECT_EQ(code_of([&] { read_inex_style(bad_tree); }), Errc::unbalanced_parens);
  std::istringstream bad_label("0\t(0 q)\n");
  EXPECT_EQ(code_of([&] { read_inex_style(bad_label); }), Errc::label_out_of_range);
}

TEST(Embeddings, LoadAndLookup) {
  std::istringstream with_header("2 3\nthe 0.1 0.2 0.3\ncat -1 0 1e-2\n");
  auto t = read_embeddings(with_header);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(t.lookup("cat"), (std::vector<double>{-1, 0, 0.01}));
  EXPECT_EQ(t.lookup("dog"), (std::vector<double>(3, 0.0)));
  std::istringstream no_header("the 0.1 0.2 0.3\ncat -1 0 1\n");
  EXPECT_EQ(read_embeddings(no_header).size(), 2u);
}

TEST(Embeddings, Errors) {
  std::istringstream short_line("the 0.1 0.2 0.3\ncat 1 2\n");
  try {
    read_embeddings(short_line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream dup("a 1 2\nb 3 4\na 5 6\n");
  EXPECT_EQ(code_of([&] { read_embeddings(dup); }), Errc::duplicate_token);
}

TEST(StratifiedSplit, SixtyForty) {
  std::vector<std::size_t> classes;
  for (int i = 0; i < 100; ++i) classes.push_back(i % 5 < 3 ? 0 : 1);
  auto s = stratified_split(classes, 0.1, 7);
  std::size_t v0 = 0, v1 = 0;
  for (auto i : s.validation) (classes[i] == 0 ? v0 : v1)++;
  EXPECT_EQ(v0, 6u);
  EXPECT_EQ(v1, 4u);
  EXPECT_EQ(s.train.size(), 90u);
  auto again = stratified_split(classes, 0.1, 7);
  EXPECT_EQ(again.validation, s.validation);
}

TEST(StratifiedSplit, SingletonClassStaysInTraining) {
  std::vector<std::size_t> classes{0, 0, 0, 0, 1};
  auto s = stratified_split(classes, 0.1, 1);
  EXPECT_NE(std::find(s.train.begin(), s.train.end(), 4u), s.train.end());
  EXPECT_EQ(s.validation.size(), 1u);
  EXPECT_EQ(code_of([] { stratified_split({}, 0.1, 1); }), Errc::empty_corpus);
}

TEST(StratifiedSplit, RandomCorporaKeepRatios) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + rng.index(300);
    const std::size_t k = 1 + rng.index(5);
    std::vector<std::size_t> classes(n);
    for (auto& c : classes) c = rng.index(k);
    auto s = stratified_split(classes, 0.1, trial);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(n);
    std::iota(expected.begin(), expected.end(), 0u);
    EXPECT_EQ(all, expected);
    std::map<std::size_t, std::size_t> total, val;
    for (auto c : classes) ++total[c];
    for (auto i : s.validation) ++val[classes[i]];
    for (auto [c, cnt] : total) {
      const double ideal = 0.1 * static_cast<double>(cnt);
      EXPECT_LE(std::abs(static_cast<double>(val[c]) - ideal), 1.0);
    }
  }
}

TEST(Synth, DepthTargets) {
  auto corpus = synth_task(SynthKind::depth_relabel, 200, 4);
  for (const auto& r : corpus) {
    ASSERT_TRUE(r.target);
    EXPECT_EQ(r.target->label(1), "0");
    EXPECT_LE(r.tree.max_outdegree(), 3u);
    for (NodeId u = 1; u <= r.tree.size(); ++u) {
      std::size_t d = 0;
      for (auto p = r.tree.parent(u); p; p = r.tree.parent(*p)) ++d;
      EXPECT_LE(d, 6u);
      EXPECT_EQ(r.target->label(u), std::to_string(std::min<std::size_t>(d, 5)));
    }
  }
}

TEST(Synth, ParityTargets) {
  auto corpus = synth_task(SynthKind::subtree_parity_relabel, 200, 5);
  for (const auto& r : corpus) {
    for (NodeId u = 1; u <= r.tree.size(); ++u) {
      std::size_t size = 0;
      std::vector<NodeId> stack{u};
      while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        ++size;
        for (NodeId c : r.tree.children(v)) stack.push_back(c);
      }
      EXPECT_EQ(r.target->label(u), size % 2 ? "1" : "0");
      if (r.tree.is_leaf(u)) {
        EXPECT_EQ(r.target->label(u), "1");
      }
    }
  }
}

TEST(Synth, KeywordTargetsMatchBruteForce) {
  auto corpus = synth_task(SynthKind::keyword_prune, 200, 6);
  const std::set<std::string> keywords(kSynthKeywords.begin(), kSynthKeywords.end());
  for (const auto& r : corpus) {
    for (NodeId u = 1; u <= r.tree.size(); ++u) {
      // Kept iff some leaf in u's subtree is a keyword.
      bool keep = false;
      std::vector<NodeId> stack{u};
      while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        if (r.tree.is_leaf(v) && keywords.count(r.tree.label(v))) keep = true;
        for (NodeId c : r.tree.children(v)) stack.push_back(c);
      }
      EXPECT_EQ(r.target->label(u), keep ? r.tree.label(u) : std::string(kNullToken));
    }
    EXPECT_NE(r.target->label(1), kNullToken);
  }
}

TEST(Synth, RootArityClasses) {
  auto corpus = synth_task(SynthKind::class_by_root_arity, 300, 7);
  std::set<std::size_t> seen;
  for (const auto& r : corpus) {
    EXPECT_EQ(*r.tree_class, r.tree.children(1).size());
    seen.insert(*r.tree_class);
  }
  EXPECT_EQ(seen, (std::set<std::size_t>{0, 1, 2, 3}));
}

TEST(Synth, Deterministic) {
  for (auto k : {SynthKind::depth_relabel, SynthKind::subtree_parity_relabel, SynthKind::keyword_prune,
                 SynthKind::class_by_root_arity}) {
    std::ostringstream a, b;
    write_corpus(a, synth_task(k, 50, 9));
    write_corpus(b, synth_task(k, 50, 9));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(parse_synth_kind(to_string(k)), k);
  }
}
