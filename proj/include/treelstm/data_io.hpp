#pragma once

// Corpus formats, embedding tables, stratified splits and synthetic tasks.
//
// Bracketed trees:   tree := '(' label tree* ')' | token
// Labels and tokens are whitespace-free; '(' ')' '\' are escaped with '\'.
//
// Corpus lines:      <class or -> TAB <tree> [TAB <target tree>]

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "treelstm/error.hpp"
#include "treelstm/labels.hpp"
#include "treelstm/rng.hpp"
#include "treelstm/tree.hpp"

namespace treelstm {

/// Label of target-tree nodes absent from a pruned output.
inline constexpr const char* kNullToken = "-NULL-";

namespace detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

class BracketParser {
 public:
  explicit BracketParser(std::string_view text) : text_(text) {}

  RawTree<std::string> parse() {
    check_balance();
    skip_space();
    if (pos_ == text_.size()) throw Error(Errc::empty_tree, "no tree in input");
    parse_tree();
    skip_space();
    if (pos_ != text_.size())
      throw Error(Errc::bad_format, "trailing characters at position " + std::to_string(pos_));
    return std::move(raw_);
  }

 private:
  void check_balance() const {
    long depth = 0;
    for (std::size_t i = 0; i < text_.size(); ++i) {
      if (text_[i] == '\\') {
        ++i;
        continue;
      }
      if (text_[i] == '(') ++depth;
      if (text_[i] == ')' && --depth < 0)
        throw Error(Errc::unbalanced_parens, "unmatched ')' at position " + std::to_string(i));
    }
    if (depth != 0) throw Error(Errc::unbalanced_parens, "unclosed '(' at position " + std::to_string(text_.size()));
  }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string read_symbol() {
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (is_space(c) || c == '(' || c == ')') break;
      if (c == '\\') {
        if (pos_ + 1 >= text_.size()) throw Error(Errc::escape_error, "dangling '\\' at end of input");
        char e = text_[pos_ + 1];
        if (e != '(' && e != ')' && e != '\\')
          throw Error(Errc::escape_error, std::string("unknown escape '\\") + e + "' at position " +
                                              std::to_string(pos_));
        out.push_back(e);
        pos_ += 2;
        continue;
      }
      out.push_back(c);
      ++pos_;
    }
    if (out.empty()) throw Error(Errc::bad_format, "expected a label at position " + std::to_string(pos_));
    return out;
  }

  std::size_t parse_tree() {
    const std::size_t id = raw_.nodes.size() + 1;
    if (text_[pos_] != '(') {
      raw_.nodes.emplace_back(id, read_symbol());
      return id;
    }
    ++pos_;
    skip_space();
    raw_.nodes.emplace_back(id, read_symbol());
    for (;;) {
      skip_space();
      if (text_[pos_] == ')') {
        ++pos_;
        return id;
      }
      const std::size_t child = parse_tree();
      raw_.edges.emplace_back(id, child);
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  RawTree<std::string> raw_;
};

inline std::string escape_symbol(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '(' || c == ')' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::bad_format, "cannot open " + path);
  return in;
}

}  // namespace detail

inline Tree<std::string> parse_bracketed(std::string_view text, std::size_t max_outdegree = kUnboundedOutdegree) {
  return validate(detail::BracketParser(text).parse(), max_outdegree);
}

/// Canonical text: leaves as bare tokens, internal nodes parenthesized.
inline std::string serialize(const Tree<std::string>& tree) {
  std::string out;
  // (node, next child index)
  std::vector<std::pair<NodeId, std::size_t>> stack{{tree.root(), 0}};
  while (!stack.empty()) {
    auto& [u, next] = stack.back();
    if (tree.is_leaf(u)) {
      out += detail::escape_symbol(tree.label(u));
      stack.pop_back();
      continue;
    }
    if (next == 0) out += "(" + detail::escape_symbol(tree.label(u));
    if (next < tree.outdegree(u)) {
      out += ' ';
      NodeId c = tree.children(u)[next++];
      stack.emplace_back(c, 0);
    } else {
      out += ')';
      stack.pop_back();
    }
  }
  return out;
}

/// One corpus line: optional tree-level class, input tree, optional
/// parallel target tree (same skeleton as the input).
struct Record {
  std::optional<std::size_t> tree_class;
  Tree<std::string> tree;
  std::optional<Tree<std::string>> target;
};

inline Record parse_record(const std::string& line, std::size_t max_outdegree = kUnboundedOutdegree) {
  const auto fields = detail::split(line, '\t');
  if (fields.size() < 2 || fields.size() > 3)
    throw Error(Errc::bad_format, "expected 2 or 3 tab-separated fields, got " + std::to_string(fields.size()));
  Record r;
  if (fields[0] != "-") {
    auto v = detail::parse_int(fields[0]);
    if (!v || *v < 0) throw Error(Errc::bad_class, "class '" + fields[0] + "' is not a nonnegative integer");
    r.tree_class = static_cast<std::size_t>(*v);
  }
  r.tree = parse_bracketed(fields[1], max_outdegree);
  if (fields.size() == 3 && fields[2] != "-") {
    r.target = parse_bracketed(fields[2], max_outdegree);
    if (!is_isomorphic(r.tree, *r.target, true))
      throw Error(Errc::skeleton_mismatch, "target tree shape differs from the input tree");
  }
  return r;
}

inline std::string format_record(const Record& r) {
  std::string line = r.tree_class ? std::to_string(*r.tree_class) : "-";
  line += '\t';
  line += serialize(r.tree);
  if (r.target) {
    line += '\t';
    line += serialize(*r.target);
  }
  return line;
}

inline std::vector<Record> read_corpus(std::istream& in, std::size_t max_outdegree = kUnboundedOutdegree) {
  std::vector<Record> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(parse_record(line, max_outdegree));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(Errc::empty_corpus, "corpus has no records");
  return out;
}

inline std::vector<Record> load_corpus(const std::string& path, std::size_t max_outdegree = kUnboundedOutdegree) {
  auto in = detail::open_input(path);
  return read_corpus(in, max_outdegree);
}

inline void write_corpus(std::ostream& out, const std::vector<Record>& records) {
  for (const auto& r : records) out << format_record(r) << '\n';
}

/// Class-labelled trees with categorical integer node labels.
struct InexCorpus {
  std::vector<std::pair<std::size_t, Tree<std::string>>> records;
  std::size_t class_count = 0;     // max class id + 1
  std::size_t label_alphabet = 0;  // max node label + 1
};

inline InexCorpus read_inex_style(std::istream& in) {
  InexCorpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(Errc::bad_format, "line " + std::to_string(lineno) + ": missing TAB after class");
    const auto cls = detail::parse_int(std::string_view(line).substr(0, tab));
    if (!cls || *cls < 0)
      throw Error(Errc::bad_class, "line " + std::to_string(lineno) + ": '" + line.substr(0, tab) + "'");
    auto tree = parse_bracketed(std::string_view(line).substr(tab + 1));
    for (NodeId u = 1; u <= tree.size(); ++u) {
      const auto label = detail::parse_int(tree.label(u));
      if (!label || *label < 0)
        throw Error(Errc::label_out_of_range, "line " + std::to_string(lineno) + ": node label '" + tree.label(u) +
                                                  "' is not a categorical integer");
      corpus.label_alphabet = std::max(corpus.label_alphabet, static_cast<std::size_t>(*label) + 1);
    }
    corpus.class_count = std::max(corpus.class_count, static_cast<std::size_t>(*cls) + 1);
    corpus.records.emplace_back(static_cast<std::size_t>(*cls), std::move(tree));
  }
  if (corpus.records.empty()) throw Error(Errc::empty_corpus, "corpus has no records");
  return corpus;
}

inline InexCorpus load_inex_style(const std::string& path) {
  auto in = detail::open_input(path);
  return read_inex_style(in);
}

/// word2vec-style text: optional `<count> <dim>` header, then
/// `token v1 ... vd` per line.
inline EmbeddingTable read_embeddings(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<EmbeddingTable> table;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<std::string> rest;
    for (std::string f; fields >> f;) rest.push_back(f);
    if (lineno == 1 && rest.size() == 1 && detail::parse_int(token) && detail::parse_int(rest[0])) continue;
    std::vector<double> v;
    v.reserve(rest.size());
    for (const auto& f : rest) {
      std::size_t used = 0;
      double x = 0;
      try {
        x = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f.size()) throw Error(Errc::bad_format, "line " + std::to_string(lineno) + ": bad value '" + f + "'");
      v.push_back(x);
    }
    if (!table) {
      if (v.empty()) throw Error(Errc::dimension_mismatch, "line " + std::to_string(lineno) + ": empty vector");
      table.emplace(v.size());
    }
    if (v.size() != table->dim())
      throw Error(Errc::dimension_mismatch, "line " + std::to_string(lineno) + ": dimension " +
                                                std::to_string(v.size()) + ", expected " +
                                                std::to_string(table->dim()));
    if (table->contains(token))
      throw Error(Errc::duplicate_token, "line " + std::to_string(lineno) + ": '" + token + "'");
    table->insert(token, std::move(v));
  }
  if (!table) throw Error(Errc::empty_corpus, "embedding file has no vectors");
  return std::move(*table);
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  auto in = detail::open_input(path);
  return read_embeddings(in);
}

struct SplitSpec {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Moves round-half-up(fraction * n_c) records of every class c to
/// validation, at least one when the class has two or more records.
inline SplitSpec stratified_split(std::span<const std::size_t> classes, double fraction, std::uint64_t seed) {
  if (classes.empty()) throw Error(Errc::empty_corpus, "nothing to split");
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < classes.size(); ++i) by_class[classes[i]].push_back(i);
  Rng rng(seed);
  SplitSpec split;
  for (auto& [cls, members] : by_class) {
    const std::size_t n = members.size();
    std::size_t k = static_cast<std::size_t>(fraction * static_cast<double>(n) + 0.5);
    if (n >= 2) k = std::max<std::size_t>(k, 1);
    k = std::min(k, n >= 2 ? n - 1 : 0);
    rng.shuffle(std::span<std::size_t>(members));
    split.validation.insert(split.validation.end(), members.begin(), members.begin() + static_cast<long>(k));
    split.train.insert(split.train.end(), members.begin() + static_cast<long>(k), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

enum class SynthKind { depth_relabel, subtree_parity_relabel, keyword_prune, class_by_root_arity };

inline std::string to_string(SynthKind k) {
  switch (k) {
    case SynthKind::depth_relabel: return "depth_relabel";
    case SynthKind::subtree_parity_relabel: return "subtree_parity_relabel";
    case SynthKind::keyword_prune: return "keyword_prune";
    case SynthKind::class_by_root_arity: return "class_by_root_arity";
  }
  return "?";
}

inline std::optional<SynthKind> parse_synth_kind(std::string_view s) {
  for (auto k : {SynthKind::depth_relabel, SynthKind::subtree_parity_relabel, SynthKind::keyword_prune,
                 SynthKind::class_by_root_arity})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline constexpr std::size_t kSynthMaxOutdegree = 3;
inline constexpr std::size_t kSynthMaxDepth = 6;
inline constexpr std::size_t kSynthMaxNodes = 40;
inline constexpr std::size_t kSynthVocabulary = 20;  // leaf tokens w0..w19
inline const std::vector<std::string> kSynthKeywords{"w0", "w1", "w2", "w3", "w4"};

namespace detail {

// Random shape: out-degree <= 3, depth <= 6, at most kSynthMaxNodes nodes;
// leaves become more likely with depth.
inline RawTree<std::string> random_shape(Rng& rng, std::size_t min_root_children) {
  RawTree<std::string> raw;
  std::vector<std::size_t> depth{0};
  raw.nodes.emplace_back(1, "");
  for (std::size_t i = 0; i < raw.nodes.size(); ++i) {
    const std::size_t id = raw.nodes[i].first;
    const std::size_t d = depth[i];
    std::size_t k = 0;
    if (d < kSynthMaxDepth) {
      const double p_leaf = 0.25 + 0.12 * static_cast<double>(d);
      k = rng.bernoulli(p_leaf) ? 0 : 1 + rng.index(kSynthMaxOutdegree);
    }
    if (i == 0) k = std::max(k, min_root_children);
    k = std::min(k, kSynthMaxNodes - raw.nodes.size());
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t cid = raw.nodes.size() + 1;
      raw.nodes.emplace_back(cid, "");
      depth.push_back(d + 1);
      raw.edges.emplace_back(id, cid);
    }
  }
  return raw;
}

}  // namespace detail

/// Symbols used as uninformative node labels by the relabel/class tasks.
inline const std::vector<std::string> kSynthSymbols{"a", "b", "c", "d"};
/// Internal-node categories of the keyword_prune task.
inline const std::vector<std::string> kSynthCategories{"S", "NP", "VP", "PP"};

/// Nodes kept by keyword_prune: keyword leaves and all their ancestors.
inline std::vector<bool> keyword_keep(const Tree<std::string>& tree, const std::vector<std::string>& keywords) {
  std::vector<bool> keep(tree.size() + 1, false);
  for (NodeId u : tree.leaves()) {
    if (std::find(keywords.begin(), keywords.end(), tree.label(u)) == keywords.end()) continue;
    for (std::optional<NodeId> v = u; v && !keep[*v]; v = tree.parent(*v)) keep[*v] = true;
  }
  return keep;
}

/// Random trees with exact, recomputable targets.
inline std::vector<Record> synth_task(SynthKind kind, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Record> out;
  out.reserve(size);
  for (std::size_t n = 0; n < size; ++n) {
    const std::size_t min_root = kind == SynthKind::class_by_root_arity ? 0 : 1;
    auto raw = detail::random_shape(rng, min_root);
    Tree<std::string> shape = validate(raw, kSynthMaxOutdegree);
    Record r;
    if (kind == SynthKind::keyword_prune) {
      Tree<std::string> tree = shape.map_labels([&](NodeId u, const std::string&) {
        if (shape.is_leaf(u)) return "w" + std::to_string(rng.index(kSynthVocabulary));
        return kSynthCategories[rng.index(kSynthCategories.size())];
      });
      const auto leaves = tree.leaves();
      const bool any = std::any_of(leaves.begin(), leaves.end(), [&](NodeId u) {
        return std::find(kSynthKeywords.begin(), kSynthKeywords.end(), tree.label(u)) != kSynthKeywords.end();
      });
      if (!any) {
        NodeId u = leaves[rng.index(leaves.size())];
        tree = tree.with_label(u, kSynthKeywords[rng.index(kSynthKeywords.size())]);
      }
      const auto keep = keyword_keep(tree, kSynthKeywords);
      r.target = tree.map_labels([&](NodeId u, const std::string& l) { return keep[u] ? l : std::string(kNullToken); });
      r.tree = std::move(tree);
    } else {
      r.tree = shape.map_labels(
          [&](NodeId, const std::string&) { return kSynthSymbols[rng.index(kSynthSymbols.size())]; });
      if (kind == SynthKind::class_by_root_arity) {
        r.tree_class = r.tree.outdegree(r.tree.root());
      } else if (kind == SynthKind::depth_relabel) {
        r.target = r.tree.map_labels(
            [&](NodeId u, const std::string&) { return std::to_string(std::min<std::size_t>(r.tree.depth(u), 5)); });
      } else {
        std::vector<std::size_t> subtree(r.tree.size() + 1, 1);
        for (NodeId u : r.tree.postorder())
          for (NodeId c : r.tree.children(u)) subtree[u] += subtree[c];
        r.target = r.tree.map_labels([&](NodeId u, const std::string&) { return std::to_string(subtree[u] % 2); });
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace treelstm
