#pragma once

// A complete transducer: input projection, TreeLSTM cell and output head,
// plus the symbol tables needed to featurize trees and name predictions.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "treelstm/autodiff.hpp"
#include "treelstm/cells.hpp"
#include "treelstm/data_io.hpp"
#include "treelstm/error.hpp"
#include "treelstm/labels.hpp"
#include "treelstm/parameter_io.hpp"
#include "treelstm/rng.hpp"
#include "treelstm/transduction.hpp"

namespace treelstm {

struct ModelConfig {
  CellKind cell = CellKind::td;
  std::size_t hidden = 32;
  std::size_t input_dim = 16;
  std::size_t arity = 3;  // N-ary cells only
  std::size_t dense_dim = 0;
  TaskSpec task;

  bool operator==(const ModelConfig& o) const {
    return cell == o.cell && hidden == o.hidden && input_dim == o.input_dim &&
           (cell != CellKind::nary || arity == o.arity) && dense_dim == o.dense_dim && task.kind == o.task.kind &&
           task.classes == o.task.classes && task.mask == o.task.mask;
  }
};

struct Model {
  ModelConfig config;
  Vocabulary vocabulary;
  std::vector<std::string> class_names;
  InputLayer input;
  CellParams cell;
  HeadParams head;

  static Model create(ModelConfig config, Vocabulary vocabulary, std::vector<std::string> class_names,
                      std::uint64_t seed) {
    if (config.task.kind != TaskKind::prune) config.task.classes = class_names.size();
    config.task.check();
    Rng rng(seed);
    Model m;
    m.config = config;
    m.vocabulary = std::move(vocabulary);
    m.class_names = std::move(class_names);
    m.input = InputLayer::create(config.input_dim, m.vocabulary.size(), config.dense_dim, rng);
    m.cell = make_cell(config.cell, config.hidden, config.input_dim, config.arity, rng);
    m.head = HeadParams::create(config.task.output_dim(), config.hidden, rng);
    return m;
  }

  Direction direction() const { return cell_direction(config.cell); }

  /// Stable order: input layer, cell, head.
  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    auto collect = [&](Parameter& p) { out.push_back(&p); };
    input.for_each_parameter(collect);
    for_each_parameter(cell, collect);
    head.for_each_parameter(collect);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (Parameter* p : parameters()) n += p->value.size();
    return n;
  }
};

/// Builds the encoder + head graph for one tree.
inline HeadOutput forward(Graph& g, Model& model, const Tree<NodeLabel>& tree) {
  if (model.config.cell == CellKind::nary && tree.max_outdegree() > model.config.arity) {
    for (NodeId u = 1; u <= tree.size(); ++u)
      if (tree.outdegree(u) > model.config.arity)
        throw Error(Errc::arity_exceeded, "node " + std::to_string(u) + " has " + std::to_string(tree.outdegree(u)) +
                                              " children, arity is " + std::to_string(model.config.arity));
  }
  const auto inputs = model.input.apply(g, tree);
  const CellVars cell = bind(g, model.cell);
  const HeadVars head = bind(g, model.head);
  return compose_scores(g, tree, inputs, cell, head, model.config.task);
}

inline Prediction predict(Model& model, const Tree<NodeLabel>& tree) {
  Graph g;
  Prediction p = read_prediction(g, forward(g, model, tree));
  if (model.config.task.kind == TaskKind::prune && model.config.task.subtree_consistent)
    p = make_subtree_consistent(tree, std::move(p));
  return p;
}

/// Training/evaluation targets of one tree, indexed by NodeId.
struct Target {
  std::optional<std::size_t> tree_class;
  std::vector<std::optional<std::size_t>> node_class;
  std::vector<double> keep;
  std::vector<std::string> reference_tokens;  // kept leaves, prune only
};

struct Example {
  Tree<NodeLabel> input;
  Tree<std::string> tokens;
  Target target;
};

/// Sorted distinct target-tree labels: the relabel output alphabet.
inline std::vector<std::string> collect_class_names(const std::vector<Record>& records) {
  std::vector<std::string> names;
  for (const auto& r : records) {
    if (!r.target) continue;
    for (NodeId u = 1; u <= r.target->size(); ++u) names.push_back(r.target->label(u));
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

inline std::vector<std::string> numbered_class_names(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i) names.push_back(std::to_string(i));
  return names;
}

/// Input symbols seen in the records. Leaf tokens are skipped when they
/// are served by an embedding table.
inline Vocabulary collect_vocabulary(const std::vector<Record>& records, bool leaves_dense) {
  std::vector<std::string> symbols;
  for (const auto& r : records)
    for (NodeId u = 1; u <= r.tree.size(); ++u)
      if (!(leaves_dense && r.tree.is_leaf(u))) symbols.push_back(r.tree.label(u));
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  Vocabulary v;
  for (const auto& s : symbols) v.add(s);
  return v;
}

inline Example make_example(const Record& r, const Model& model, const EmbeddingTable* embeddings = nullptr) {
  const TaskSpec& task = model.config.task;
  Example ex{featurize(r.tree, model.vocabulary, embeddings), r.tree, {}};
  const std::size_t n = r.tree.size();
  switch (task.kind) {
    case TaskKind::supersource:
      if (!r.tree_class) throw Error(Errc::bad_class, "record has no tree class");
      if (*r.tree_class >= task.classes)
        throw Error(Errc::label_out_of_range, "class " + std::to_string(*r.tree_class) + " >= " +
                                                  std::to_string(task.classes));
      ex.target.tree_class = r.tree_class;
      break;
    case TaskKind::relabel: {
      if (!r.target) throw Error(Errc::bad_format, "relabel record has no target tree");
      ex.target.node_class.assign(n + 1, std::nullopt);
      for (NodeId u : target_mask(r.tree, task.mask)) {
        const auto& name = r.target->label(u);
        auto it = std::find(model.class_names.begin(), model.class_names.end(), name);
        if (it == model.class_names.end()) throw Error(Errc::label_out_of_range, "unknown target label '" + name + "'");
        ex.target.node_class[u] = static_cast<std::size_t>(it - model.class_names.begin());
      }
      break;
    }
    case TaskKind::prune:
      if (!r.target) throw Error(Errc::bad_format, "prune record has no target tree");
      ex.target.keep.assign(n + 1, 0.0);
      for (NodeId u = 1; u <= n; ++u) ex.target.keep[u] = r.target->label(u) != kNullToken ? 1.0 : 0.0;
      for (NodeId u : r.tree.leaves())
        if (ex.target.keep[u] == 1.0) ex.target.reference_tokens.push_back(r.tree.label(u));
      break;
  }
  return ex;
}

inline std::vector<Example> make_examples(const std::vector<Record>& records, const Model& model,
                                          const EmbeddingTable* embeddings = nullptr) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(make_example(r, model, embeddings));
  return out;
}

inline std::optional<CellKind> parse_cell_kind(std::string_view s) {
  for (auto k : {CellKind::td, CellKind::childsum, CellKind::nary})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
  for (auto k : {TaskKind::supersource, TaskKind::relabel, TaskKind::prune})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline void save_model(std::ostream& out, Model& m) {
  const auto& c = m.config;
  out << "treelstm-model 1\n";
  out << "cell " << to_string(c.cell) << '\n';
  out << "hidden " << c.hidden << '\n';
  out << "input_dim " << c.input_dim << '\n';
  out << "arity " << c.arity << '\n';
  out << "dense_dim " << c.dense_dim << '\n';
  out << "task " << to_string(c.task.kind) << '\n';
  out << "classes " << c.task.classes << '\n';
  out << "mask " << to_string(c.task.mask) << '\n';
  out << "subtree_consistent " << (c.task.subtree_consistent ? 1 : 0) << '\n';
  out << "vocabulary " << m.vocabulary.size() << '\n';
  for (const auto& s : m.vocabulary.symbols()) out << s << '\n';
  out << "class_names " << m.class_names.size() << '\n';
  for (const auto& s : m.class_names) out << s << '\n';
  const auto params = m.parameters();
  out << "parameters " << params.size() << '\n';
  for (const Parameter* p : params) write_parameter(out, *p);
}

inline Model load_model(std::istream& in) {
  auto expect = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::bad_format, "checkpoint truncated before '" + key + "'");
    std::istringstream fields(line);
    std::string k, v;
    fields >> k >> v;
    if (k != key) throw Error(Errc::bad_format, "expected '" + key + "', found '" + line + "'");
    return v;
  };
  auto expect_count = [&](const std::string& key) {
    const auto v = detail::parse_int(expect(key));
    if (!v || *v < 0) throw Error(Errc::bad_format, "bad count for '" + key + "'");
    return static_cast<std::size_t>(*v);
  };
  auto read_lines = [&](std::size_t n) {
    std::vector<std::string> lines(n);
    for (auto& l : lines)
      if (!std::getline(in, l)) throw Error(Errc::bad_format, "checkpoint truncated");
    return lines;
  };

  if (expect("treelstm-model") != "1") throw Error(Errc::bad_format, "unsupported checkpoint version");
  ModelConfig c;
  const auto cell = parse_cell_kind(expect("cell"));
  if (!cell) throw Error(Errc::bad_format, "unknown cell kind in checkpoint");
  c.cell = *cell;
  c.hidden = expect_count("hidden");
  c.input_dim = expect_count("input_dim");
  c.arity = expect_count("arity");
  c.dense_dim = expect_count("dense_dim");
  const auto task = parse_task_kind(expect("task"));
  if (!task) throw Error(Errc::bad_format, "unknown task kind in checkpoint");
  c.task.kind = *task;
  c.task.classes = expect_count("classes");
  c.task.mask = expect("mask") == "all" ? MaskPolicy::all : MaskPolicy::internal;
  c.task.subtree_consistent = expect_count("subtree_consistent") != 0;
  Vocabulary vocab(read_lines(expect_count("vocabulary")));
  auto class_names = read_lines(expect_count("class_names"));

  Model m = Model::create(c, std::move(vocab), std::move(class_names), 0);
  const auto params = m.parameters();
  if (expect_count("parameters") != params.size())
    throw Error(Errc::checkpoint_mismatch, "parameter count differs from the configured model");
  read_parameters(in, params);
  return m;
}

inline void save_model(const std::string& path, Model& m) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::bad_format, "cannot write " + path);
  save_model(out, m);
}

inline Model load_model(const std::string& path) {
  auto in = detail::open_input(path);
  return load_model(in);
}

}  // namespace treelstm
