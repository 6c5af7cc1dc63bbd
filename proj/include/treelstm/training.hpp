#pragma once

// Losses, L2 regularization, Adam, early-stopped training and model
// selection over the hidden size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "treelstm/autodiff.hpp"
#include "treelstm/error.hpp"
#include "treelstm/metrics.hpp"
#include "treelstm/model.hpp"
#include "treelstm/rng.hpp"
#include "treelstm/transduction.hpp"

namespace treelstm {

/// Hidden sizes explored by model selection.
inline const std::vector<std::size_t> kHiddenGrid{100, 150, 200, 250, 300, 350, 400};

struct Hyperparams {
  std::size_t hidden = 32;
  double lambda = 1e-4;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  std::size_t batch_size = 1;
};

/// Negative log-likelihood (supersource, relabel; summed over scored nodes)
/// or binary cross-entropy summed over all nodes (prune, target 1 = keep).
inline Var task_loss(Graph& g, const TaskSpec& task, const HeadOutput& out, const Target& target) {
  switch (task.kind) {
    case TaskKind::supersource: {
      if (!target.tree_class) throw Error(Errc::label_out_of_range, "missing tree class");
      const std::size_t k = *target.tree_class;
      if (k >= g.value(out.tree_log_probs).size())
        throw Error(Errc::label_out_of_range, "class " + std::to_string(k) + " out of range");
      return g.scale(g.pick(out.tree_log_probs, k), -1.0);
    }
    case TaskKind::relabel: {
      std::vector<Var> terms;
      for (std::size_t u = 0; u < out.node_log_probs.size(); ++u) {
        if (!out.node_log_probs[u]) continue;
        if (u >= target.node_class.size() || !target.node_class[u])
          throw Error(Errc::label_out_of_range, "no target label for node " + std::to_string(u));
        const std::size_t k = *target.node_class[u];
        if (k >= g.value(*out.node_log_probs[u]).size())
          throw Error(Errc::label_out_of_range, "class " + std::to_string(k) + " out of range");
        terms.push_back(g.pick(*out.node_log_probs[u], k));
      }
      return g.scale(g.sum_list(terms, 1), -1.0);
    }
    case TaskKind::prune: {
      if (target.keep.size() != out.keep_logits.size())
        throw Error(Errc::label_out_of_range, "keep targets do not cover the tree");
      std::vector<Var> terms;
      for (std::size_t u = 1; u < out.keep_logits.size(); ++u) {
        const double y = target.keep[u];
        if (y < 0.0 || y > 1.0) throw Error(Errc::label_out_of_range, "keep target outside [0, 1]");
        terms.push_back(g.bce_with_logit(out.keep_logits[u], y));
      }
      return g.sum_list(terms, 1);
    }
  }
  throw Error(Errc::bad_format, "unknown task");
}

/// Same losses evaluated on a read-out Prediction. Probabilities are
/// clamped to [1e-12, 1 - 1e-12] before taking logs.
inline double loss_value(const TaskSpec& task, const Prediction& p, const Target& target) {
  auto nll = [](const ClassPrediction& c, std::size_t k) {
    if (k >= c.log_probs.size()) throw Error(Errc::label_out_of_range, "class " + std::to_string(k) + " out of range");
    return -c.log_probs[k];
  };
  switch (task.kind) {
    case TaskKind::supersource:
      if (!target.tree_class || !p.tree_class) throw Error(Errc::label_out_of_range, "missing tree class");
      return nll(*p.tree_class, *target.tree_class);
    case TaskKind::relabel: {
      double s = 0.0;
      for (std::size_t u = 0; u < p.node_classes.size(); ++u) {
        if (!p.node_classes[u]) continue;
        if (u >= target.node_class.size() || !target.node_class[u])
          throw Error(Errc::label_out_of_range, "no target label for node " + std::to_string(u));
        s += nll(*p.node_classes[u], *target.node_class[u]);
      }
      return s;
    }
    case TaskKind::prune: {
      double s = 0.0;
      for (std::size_t u = 1; u < p.keep_probability.size(); ++u) {
        const double q = std::clamp(p.keep_probability[u], 1e-12, 1.0 - 1e-12);
        const double y = target.keep.at(u);
        s -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
      }
      return s;
    }
  }
  return 0.0;
}

/// base + lambda * (sum of squared weight entries); biases are excluded.
inline Var regularized_loss(Graph& g, Var base, std::span<Parameter* const> params, double lambda) {
  if (lambda < 0.0) throw Error(Errc::label_out_of_range, "lambda must be nonnegative");
  return g.add(base, g.l2_penalty(params, lambda));
}

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<Tensor> m, v;
};

/// Bias-corrected Adam update from the accumulated gradients, which are
/// then reset to zero.
inline void adam_step(AdamState& state, std::span<Parameter* const> params, double lr) {
  if (state.m.empty()) {
    for (Parameter* p : params) {
      state.m.emplace_back(p->value.rows(), p->value.cols());
      state.v.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (state.m.size() != params.size()) throw Error(Errc::shape_mismatch, "Adam state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    p.zero_grad();
  }
}

struct EvalMetrics {
  double accuracy = 0.0;     // class / node-label accuracy, or mean SSA for prune
  double compression = 1.0;  // prune only
  double t = 0.0;            // prune only
  /// The early-stopping criterion: t for prune, accuracy otherwise.
  double primary(TaskKind kind) const { return kind == TaskKind::prune ? t : accuracy; }
};

/// Compressed sequence (kept leaf tokens) of one prediction.
inline std::vector<std::string> compressed_tokens(const Example& ex, const Prediction& p) {
  return compressed_sequence(ex.tokens, p);
}

inline EvalMetrics evaluate(Model& model, std::span<const Example> examples) {
  if (examples.empty()) throw Error(Errc::empty_split, "nothing to evaluate");
  const TaskKind kind = model.config.task.kind;
  EvalMetrics m;
  double acc = 0.0, comp = 0.0;
  for (const Example& ex : examples) {
    const Prediction p = predict(model, ex.input);
    switch (kind) {
      case TaskKind::supersource: acc += p.tree_class->label == *ex.target.tree_class ? 1.0 : 0.0; break;
      case TaskKind::relabel: {
        std::size_t hits = 0, total = 0;
        for (std::size_t u = 1; u < p.node_classes.size(); ++u) {
          if (!p.node_classes[u]) continue;
          ++total;
          hits += p.node_classes[u]->label == *ex.target.node_class[u];
        }
        acc += static_cast<double>(hits) / static_cast<double>(total);
        break;
      }
      case TaskKind::prune: {
        const auto candidate = compressed_tokens(ex, p);
        acc += ssa(candidate, ex.target.reference_tokens);
        comp += compression_rate(candidate.size(), ex.tokens.leaves().size());
        break;
      }
    }
  }
  const double n = static_cast<double>(examples.size());
  m.accuracy = acc / n;
  if (kind == TaskKind::prune) {
    m.compression = comp / n;
    m.t = m.compression > 0.0 ? hybrid_metric(m.accuracy, m.compression) : 0.0;
  }
  return m;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  EvalMetrics validation;
};

struct TrainResult {
  Model best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_metric = -std::numeric_limits<double>::infinity();
};

/// Mean regularized loss over the examples at the current parameters.
inline double mean_loss(Model& model, std::span<const Example> examples, double lambda) {
  const auto params = model.parameters();
  double total = 0.0;
  for (const Example& ex : examples) {
    Graph g;
    const Var base = task_loss(g, model.config.task, forward(g, model, ex.input), ex.target);
    total += g.scalar(regularized_loss(g, base, params, lambda));
  }
  return total / static_cast<double>(examples.size());
}

/// Per-tree (or mini-batch) Adam updates in a seeded shuffled order; after
/// every epoch the validation metric decides early stopping. Returns the
/// best-validation model.
inline TrainResult train(Model model, std::span<const Example> train_set, std::span<const Example> validation,
                         const Hyperparams& hyper) {
  if (train_set.empty()) throw Error(Errc::empty_split, "training split is empty");
  if (validation.empty()) throw Error(Errc::empty_split, "validation split is empty");
  const TaskKind kind = model.config.task.kind;
  Rng rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamState adam;
  const auto params = model.parameters();
  for (Parameter* p : params) p->zero_grad();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::max<std::size_t>(hyper.batch_size, 1);

  TrainResult result{model, {}, 0, -std::numeric_limits<double>::infinity()};
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t pending = 0;
    for (std::size_t idx : order) {
      const Example& ex = train_set[idx];
      Graph g;
      const Var base = task_loss(g, model.config.task, forward(g, model, ex.input), ex.target);
      const Var loss = regularized_loss(g, base, params, hyper.lambda);
      total += g.scalar(loss);
      g.backward(loss);
      if (++pending == batch) {
        adam_step(adam, params, hyper.learning_rate);
        pending = 0;
      }
    }
    if (pending) adam_step(adam, params, hyper.learning_rate);

    EpochRecord rec{epoch, total / static_cast<double>(order.size()), evaluate(model, validation)};
    result.history.push_back(rec);
    const double metric = rec.validation.primary(kind);
    if (metric > result.best_metric) {
      result.best_metric = metric;
      result.best_epoch = epoch;
      result.best = model;
      stale = 0;
    } else {
      ++stale;
    }
    if (stale >= hyper.patience) break;
  }
  return result;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// One tab-separated line per epoch after a '#' header.
inline void write_history(std::ostream& out, TaskKind kind, std::span<const EpochRecord> history) {
  if (kind == TaskKind::prune)
    out << "# epoch\ttrain_loss\tval_ssa\tval_compression\tval_t\n";
  else
    out << "# epoch\ttrain_loss\tval_accuracy\n";
  for (const auto& r : history) {
    out << r.epoch << '\t' << format_double(r.train_loss) << '\t' << format_double(r.validation.accuracy);
    if (kind == TaskKind::prune)
      out << '\t' << format_double(r.validation.compression) << '\t' << format_double(r.validation.t);
    out << '\n';
  }
}

/// x-y pairs per metric: `metric<TAB>epoch<TAB>value`.
inline void write_plot_data(std::ostream& out, TaskKind kind, std::span<const EpochRecord> history) {
  auto series = [&](const char* name, auto get) {
    for (const auto& r : history) out << name << '\t' << r.epoch << '\t' << format_double(get(r)) << '\n';
  };
  series("train_loss", [](const EpochRecord& r) { return r.train_loss; });
  if (kind == TaskKind::prune) {
    series("val_ssa", [](const EpochRecord& r) { return r.validation.accuracy; });
    series("val_compression", [](const EpochRecord& r) { return r.validation.compression; });
    series("val_t", [](const EpochRecord& r) { return r.validation.t; });
  } else {
    series("val_accuracy", [](const EpochRecord& r) { return r.validation.accuracy; });
  }
}

struct SelectionEntry {
  std::size_t hidden = 0;
  double metric = 0.0;
  std::size_t best_epoch = 0;
};

struct SelectionResult {
  std::size_t best_hidden = 0;
  std::vector<SelectionEntry> report;
  TrainResult best;
};

/// Trains one model per hidden size; the best validation metric wins and
/// ties go to the smaller size.
inline SelectionResult model_select(const std::function<Model(std::size_t)>& make_model,
                                    std::span<const Example> train_set, std::span<const Example> validation,
                                    Hyperparams hyper, std::vector<std::size_t> grid) {
  if (grid.empty()) throw Error(Errc::empty_input, "empty hidden-size grid");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::optional<SelectionResult> out;
  std::vector<SelectionEntry> report;
  for (std::size_t h : grid) {
    hyper.hidden = h;
    TrainResult r = train(make_model(h), train_set, validation, hyper);
    report.push_back({h, r.best_metric, r.best_epoch});
    if (!out || r.best_metric > out->best.best_metric) out = SelectionResult{h, {}, std::move(r)};
  }
  out->report = std::move(report);
  return std::move(*out);
}

}  // namespace treelstm
