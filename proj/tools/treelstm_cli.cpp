// treelstm: train, evaluate, gradient-check and generate synthetic corpora.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treelstm/data_io.hpp"
#include "treelstm/gradcheck.hpp"
#include "treelstm/metrics.hpp"
#include "treelstm/model.hpp"
#include "treelstm/training.hpp"

namespace fs = std::filesystem;
using namespace treelstm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string task, cell, mask = "internal";
  std::size_t hidden = 32;
  std::vector<std::size_t> grid;
  std::string train, val, test, embeddings, checkpoint, out, predictions, config;
  std::uint64_t seed = 1;
  std::size_t runs = 10;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  std::size_t max_outdegree = 3;
  std::size_t input_dim = 16;
  std::size_t batch_size = 1;
  double learning_rate = 1e-3;
  double lambda = 1e-4;
  bool subtree_consistent = false;
  // synth
  std::string kind;
  std::size_t size = 100;
  // gradcheck
  bool inject_fault = false;
  std::size_t trees = 20;
  std::size_t max_nodes = 8;
};

std::string run_path(const std::string& base, std::size_t run, std::size_t runs) {
  return runs > 1 ? base + ".run" + std::to_string(run) : base;
}

void require_file(const std::string& flag, const std::string& path) {
  if (path.empty()) throw UsageError(flag + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(flag + ": no such file: " + path);
}

TaskKind task_of(const Options& o) {
  auto t = parse_task_kind(o.task);
  if (!t) throw UsageError("--task must be supersource, relabel or prune");
  return *t;
}

CellKind cell_of(const Options& o) {
  auto c = parse_cell_kind(o.cell);
  if (!c) throw UsageError("--cell must be td, childsum or nary");
  return *c;
}

std::vector<Record> concat(std::vector<Record> a, const std::vector<Record>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<EvalReport> report_columns(TaskKind kind, const std::string& prefix) {
  if (kind == TaskKind::prune) return {{prefix + "ssa", 0, {}}, {prefix + "compression", 0, {}}, {prefix + "t", 0, {}}};
  return {{prefix + "accuracy", 0, {}}};
}

void add_metrics(std::vector<EvalReport>& cols, std::size_t offset, TaskKind kind, const EvalMetrics& m,
                 std::size_t samples) {
  cols[offset].runs.push_back(m.accuracy);
  cols[offset].samples = samples;
  if (kind == TaskKind::prune) {
    cols[offset + 1].runs.push_back(m.compression);
    cols[offset + 2].runs.push_back(m.t);
    cols[offset + 1].samples = cols[offset + 2].samples = samples;
  }
}

int cmd_synth(const Options& o) {
  auto kind = parse_synth_kind(o.kind);
  if (!kind)
    throw UsageError("--kind must be depth_relabel, subtree_parity_relabel, keyword_prune or class_by_root_arity");
  if (o.size == 0) throw UsageError("--size must be positive");
  const auto corpus = synth_task(*kind, o.size, o.seed);
  if (o.out.empty()) {
    write_corpus(std::cout, corpus);
    return 0;
  }
  std::ofstream out(o.out);
  if (!out) throw Error(Errc::bad_format, "cannot write " + o.out);
  write_corpus(out, corpus);
  return 0;
}

int cmd_gradcheck(const Options& o, bool hidden_given) {
  const CellKind cell = cell_of(o);
  std::vector<TaskKind> tasks{TaskKind::supersource, TaskKind::relabel, TaskKind::prune};
  if (!o.task.empty()) tasks = {task_of(o)};
  const Fault fault = o.inject_fault ? Fault::flip_sigmoid_grad : Fault::none;
  bool ok = true;
  std::cout << "cell\ttask\tmax_rel_error\tworst_parameter\tresult\n";
  for (TaskKind task : tasks) {
    auto c = make_gradcheck_case(cell, task, o.trees, o.max_nodes, o.seed, hidden_given ? o.hidden : 4);
    const auto r = check_gradients(c, o.lambda, 1e-5, 1e-4, fault);
    char err[32];
    std::snprintf(err, sizeof err, "%.3e", r.max_rel_error);
    std::cout << to_string(cell) << '\t' << to_string(task) << '\t' << err << '\t' << r.worst_parameter << '\t'
              << (r.passed ? "PASS" : "FAIL") << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

int cmd_train(const Options& o) {
  const TaskKind task = task_of(o);
  const CellKind cell = cell_of(o);
  require_file("--train", o.train);
  if (!o.val.empty()) require_file("--val", o.val);
  if (!o.test.empty()) require_file("--test", o.test);
  if (!o.embeddings.empty()) require_file("--embeddings", o.embeddings);
  if (o.checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (o.runs == 0) throw UsageError("--runs must be positive");
  if (o.max_outdegree == 0) throw UsageError("--max-outdegree must be positive");

  const std::size_t bound = cell == CellKind::nary ? o.max_outdegree : kUnboundedOutdegree;
  auto train_records = load_corpus(o.train, bound);
  std::vector<Record> val_records;
  if (o.val.empty()) {
    // Hold out a stratified 10% of the training corpus.
    std::vector<std::size_t> classes;
    for (const auto& r : train_records) classes.push_back(r.tree_class.value_or(0));
    const auto split = stratified_split(classes, 0.1, o.seed);
    if (split.validation.empty()) throw Error(Errc::empty_split, "training corpus too small to hold out validation");
    std::vector<Record> kept;
    for (auto i : split.train) kept.push_back(train_records[i]);
    for (auto i : split.validation) val_records.push_back(train_records[i]);
    train_records = std::move(kept);
  } else {
    val_records = load_corpus(o.val, bound);
  }
  std::vector<Record> test_records;
  if (!o.test.empty()) test_records = load_corpus(o.test, bound);

  std::optional<EmbeddingTable> table;
  if (!o.embeddings.empty()) table = load_embeddings(o.embeddings);
  const EmbeddingTable* emb = table ? &*table : nullptr;

  ModelConfig cfg;
  cfg.cell = cell;
  cfg.hidden = o.hidden;
  cfg.input_dim = o.input_dim;
  cfg.arity = o.max_outdegree;
  cfg.dense_dim = table ? table->dim() : 0;
  cfg.task.kind = task;
  cfg.task.mask = o.mask == "all" ? MaskPolicy::all : MaskPolicy::internal;
  cfg.task.subtree_consistent = o.subtree_consistent;

  const auto labelled = concat(concat(train_records, val_records), test_records);
  std::vector<std::string> class_names;
  if (task == TaskKind::relabel) {
    class_names = collect_class_names(labelled);
  } else if (task == TaskKind::supersource) {
    std::size_t max_class = 0;
    for (const auto& r : labelled) {
      if (!r.tree_class) throw Error(Errc::bad_class, "supersource task needs a class on every record");
      max_class = std::max(max_class, *r.tree_class);
    }
    class_names = numbered_class_names(std::max<std::size_t>(max_class + 1, 2));
  }
  if (task == TaskKind::relabel && class_names.size() < 2) class_names.push_back("<none>");
  const Vocabulary vocab = collect_vocabulary(train_records, emb != nullptr);

  Hyperparams hyper;
  hyper.hidden = o.hidden;
  hyper.lambda = o.lambda;
  hyper.learning_rate = o.learning_rate;
  hyper.epochs = o.epochs;
  hyper.patience = o.patience;
  hyper.batch_size = o.batch_size;

  auto columns = report_columns(task, "val_");
  const std::size_t test_offset = columns.size();
  if (!test_records.empty())
    for (auto& c : report_columns(task, "test_")) columns.push_back(c);

  for (std::size_t run = 1; run <= o.runs; ++run) {
    const std::uint64_t seed = o.seed + run - 1;
    hyper.seed = seed;
    auto make_model = [&](std::size_t h) {
      ModelConfig c = cfg;
      c.hidden = h;
      return Model::create(c, vocab, class_names, seed);
    };
    Model probe = make_model(o.hidden);
    const auto train_set = make_examples(train_records, probe, emb);
    const auto val_set = make_examples(val_records, probe, emb);

    TrainResult result{probe, {}, 0, 0.0};
    if (!o.grid.empty()) {
      auto sel = model_select(make_model, train_set, val_set, hyper, o.grid);
      for (const auto& e : sel.report)
        std::cerr << "run " << run << ": H=" << e.hidden << " best epoch " << e.best_epoch << " metric "
                  << format_double(e.metric) << '\n';
      result = std::move(sel.best);
    } else {
      result = train(make_model(o.hidden), train_set, val_set, hyper);
    }
    std::cerr << "run " << run << ": H=" << result.best.config.hidden << " best epoch " << result.best_epoch
              << " of " << result.history.size() << ", validation " << format_double(result.best_metric) << '\n';

    save_model(run_path(o.checkpoint, run, o.runs), result.best);
    const std::string history_path = run_path(o.out.empty() ? o.checkpoint + ".history.tsv" : o.out, run, o.runs);
    std::ofstream hist(history_path);
    if (!hist) throw Error(Errc::bad_format, "cannot write " + history_path);
    write_history(hist, task, result.history);

    add_metrics(columns, 0, task, evaluate(result.best, val_set), val_set.size());
    if (!test_records.empty()) {
      const auto test_set = make_examples(test_records, result.best, emb);
      add_metrics(columns, test_offset, task, evaluate(result.best, test_set), test_set.size());
    }
  }
  write_report_table(std::cout, columns);
  return 0;
}

std::vector<std::string> eval_checkpoints(const Options& o, bool runs_given) {
  if (o.checkpoint.empty()) throw UsageError("--checkpoint is required");
  std::vector<std::string> paths;
  if (runs_given) {
    if (o.runs == 0) throw UsageError("--runs must be positive");
    for (std::size_t k = 1; k <= o.runs; ++k) paths.push_back(run_path(o.checkpoint, k, o.runs));
  } else if (fs::is_regular_file(o.checkpoint)) {
    paths.push_back(o.checkpoint);
  } else {
    for (std::size_t k = 1; fs::is_regular_file(run_path(o.checkpoint, k, 2)); ++k)
      paths.push_back(run_path(o.checkpoint, k, 2));
    if (paths.empty()) paths.push_back(o.checkpoint);
  }
  for (const auto& p : paths) require_file("--checkpoint", p);
  return paths;
}

int cmd_eval(const Options& o, bool runs_given, const std::map<std::string, bool>& given) {
  const auto paths = eval_checkpoints(o, runs_given);
  require_file("--test", o.test);
  if (!o.embeddings.empty()) require_file("--embeddings", o.embeddings);
  std::optional<EmbeddingTable> table;
  if (!o.embeddings.empty()) table = load_embeddings(o.embeddings);

  std::vector<EvalReport> columns;
  std::ofstream dump;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    Model model = load_model(paths[k]);
    const auto& c = model.config;
    if (given.at("task") && parse_task_kind(o.task) != c.task.kind)
      throw Error(Errc::checkpoint_mismatch, paths[k] + " was trained for task " + to_string(c.task.kind));
    if (given.at("cell") && parse_cell_kind(o.cell) != c.cell)
      throw Error(Errc::checkpoint_mismatch, paths[k] + " holds a " + to_string(c.cell) + " cell");
    if (given.at("hidden") && o.hidden != c.hidden)
      throw Error(Errc::checkpoint_mismatch, paths[k] + " has hidden size " + std::to_string(c.hidden));
    if (c.dense_dim > 0 && !table)
      throw Error(Errc::checkpoint_mismatch, paths[k] + " expects leaf embeddings; pass --embeddings");
    if (table && c.dense_dim != table->dim())
      throw Error(Errc::checkpoint_mismatch, "embedding dimension " + std::to_string(table->dim()) +
                                                 " differs from the checkpoint's " + std::to_string(c.dense_dim));
    const std::size_t bound = c.cell == CellKind::nary ? c.arity : kUnboundedOutdegree;
    const auto records = load_corpus(o.test, bound);
    const auto examples = make_examples(records, model, table ? &*table : nullptr);
    if (columns.empty()) columns = report_columns(c.task.kind, "");
    add_metrics(columns, 0, c.task.kind, evaluate(model, examples), examples.size());

    if (!o.predictions.empty()) {
      const std::string path = run_path(o.predictions, k + 1, paths.size());
      std::ofstream out(path);
      if (!out) throw Error(Errc::bad_format, "cannot write " + path);
      auto name = [&](std::size_t cls) {
        return cls < model.class_names.size() ? model.class_names[cls] : std::to_string(cls);
      };
      for (std::size_t i = 0; i < examples.size(); ++i)
        write_prediction_record(out, std::to_string(i + 1), predict(model, examples[i].input), name);
    }
  }
  write_report_table(std::cout, columns);
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    if (!out) throw Error(Errc::bad_format, "cannot write " + o.out);
    write_report_table(out, columns);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TreeLSTM transducers over labelled trees"};
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--task", o.task, "supersource | relabel | prune");
  app.add_option("--cell", o.cell, "td | childsum | nary");
  app.add_option("--hidden", o.hidden, "hidden size H")->capture_default_str();
  app.add_option("--grid", o.grid, "hidden sizes for model selection, comma separated")->delimiter(',');
  app.add_option("--train", o.train, "training corpus");
  app.add_option("--val", o.val, "validation corpus (default: stratified 10% of --train)");
  app.add_option("--test", o.test, "test corpus");
  app.add_option("--embeddings", o.embeddings, "leaf embeddings, word2vec text format");
  app.add_option("--checkpoint", o.checkpoint, "model file");
  app.add_option("--seed", o.seed, "random seed")->capture_default_str();
  app.add_option("--runs", o.runs, "independent runs")->capture_default_str();
  app.add_option("--epochs", o.epochs, "epoch budget")->capture_default_str();
  app.add_option("--patience", o.patience, "early-stopping patience")->capture_default_str();
  app.add_option("--max-outdegree", o.max_outdegree, "N for the N-ary cell")->capture_default_str();
  app.add_option("--out", o.out, "output file (history, report or corpus)");
  app.add_option("--predictions", o.predictions, "prediction dump (eval)");
  app.add_option("--input-dim", o.input_dim, "cell input dimension")->capture_default_str();
  app.add_option("--lr", o.learning_rate, "Adam learning rate")->capture_default_str();
  app.add_option("--lambda", o.lambda, "L2 weight")->capture_default_str();
  app.add_option("--batch-size", o.batch_size, "trees per update")->capture_default_str();
  app.add_option("--mask", o.mask, "relabel targets: internal | all")->check(CLI::IsMember({"internal", "all"}));
  app.add_flag("--subtree-consistent", o.subtree_consistent, "prune: drop descendants of dropped nodes");
  app.add_option("--kind", o.kind, "synthetic task kind");
  app.add_option("--size", o.size, "synthetic corpus size")->capture_default_str();
  app.add_flag("--inject-fault", o.inject_fault, "gradcheck: corrupt a backward rule");
  app.add_option("--trees", o.trees, "gradcheck: random trees")->capture_default_str();
  app.add_option("--max-nodes", o.max_nodes, "gradcheck: nodes per tree")->capture_default_str();

  auto* train = app.add_subcommand("train", "train and save checkpoints");
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints on a test corpus");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of a cell and head");
  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }

  const std::map<std::string, bool> given{
      {"task", app.count("--task") > 0}, {"cell", app.count("--cell") > 0}, {"hidden", app.count("--hidden") > 0}};
  try {
    if (*synth) return cmd_synth(o);
    if (*gradcheck) return cmd_gradcheck(o, given.at("hidden"));
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o, app.count("--runs") > 0, given);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
