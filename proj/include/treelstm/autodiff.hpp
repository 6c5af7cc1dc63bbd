#pragma once

// Dense double-precision tensors and a tape-based reverse-mode autodiff
// graph. One Graph is built per tree unfolding and discarded afterwards.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treelstm/error.hpp"

namespace treelstm {

/// Row-major (rows, cols) matrix of doubles; vectors are (n, 1).
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_)
      throw Error(Errc::shape_mismatch, "expected " + std::to_string(rows_ * cols_) + " values, got " +
                                            std::to_string(data_.size()));
    require_finite();
  }

  static Tensor column(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(n, 1, std::move(values));
  }
  static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_string() const { return "(" + std::to_string(rows_) + ", " + std::to_string(cols_) + ")"; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  void require_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) throw Error(Errc::non_finite, "tensor holds NaN or Inf");
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A trainable tensor with its gradient accumulator. `regularized` marks
/// weight matrices that take part in the L2 penalty (biases do not).
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool regularized = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool reg = true)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()), regularized(reg) {}

  void zero_grad() { grad.set_zero(); }
};

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = 0;
};

/// Test hook: deliberately corrupts one backward rule.
enum class Fault { none, flip_sigmoid_grad };

class Graph {
 public:
  explicit Graph(Fault fault = Fault::none) : fault_(fault) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(Var v) const { return *nodes_[v.id].value; }
  double scalar(Var v) const { return (*nodes_[v.id].value)[0]; }

  Var constant(Tensor t) {
    t.require_finite();
    Node& n = push();
    n.own_value = std::move(t);
    n.value = &n.own_value;
    return Var{nodes_.size() - 1};
  }

  /// Leaf bound to a parameter: reads its value in place and accumulates
  /// into its gradient during backward.
  Var parameter(Parameter& p) {
    Node& n = push();
    n.value = &p.value;
    n.grad = &p.grad;
    n.is_parameter = true;
    n.requires_grad = true;
    return Var{nodes_.size() - 1};
  }

  Var matvec(Var w, Var x) {
    const Tensor& W = value(w);
    const Tensor& X = value(x);
    if (X.cols() != 1 || W.cols() != X.rows())
      throw Error(Errc::shape_mismatch, "matvec expected x of shape (" + std::to_string(W.cols()) + ", 1), got " +
                                            X.shape_string());
    Tensor out(W.rows(), 1);
    for (std::size_t r = 0; r < W.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < W.cols(); ++c) s += W(r, c) * X[c];
      out[r] = s;
    }
    return record(std::move(out), {w, x}, [](Node& o, std::span<Node* const> in) {
      Node& wn = *in[0];
      Node& xn = *in[1];
      const Tensor& W = *wn.value;
      const Tensor& X = *xn.value;
      const Tensor& g = *o.grad;
      if (wn.requires_grad) {
        Tensor& gw = *wn.grad;
        for (std::size_t r = 0; r < W.rows(); ++r)
          for (std::size_t c = 0; c < W.cols(); ++c) gw(r, c) += g[r] * X[c];
      }
      if (xn.requires_grad) {
        Tensor& gx = *xn.grad;
        for (std::size_t r = 0; r < W.rows(); ++r)
          for (std::size_t c = 0; c < W.cols(); ++c) gx[c] += W(r, c) * g[r];
      }
    });
  }

  Var add(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_same_shape(A, B, "add");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
    return record(std::move(out), {a, b}, [](Node& o, std::span<Node* const> in) {
      for (Node* n : in)
        if (n->requires_grad) accumulate(*n->grad, *o.grad);
    });
  }

  Var mul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_same_shape(A, B, "mul");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    return record(std::move(out), {a, b}, [](Node& o, std::span<Node* const> in) {
      Node& an = *in[0];
      Node& bn = *in[1];
      const Tensor& g = *o.grad;
      if (an.requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) (*an.grad)[i] += g[i] * (*bn.value)[i];
      if (bn.requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) (*bn.grad)[i] += g[i] * (*an.value)[i];
    });
  }

  Var scale(Var a, double factor) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
    return record(std::move(out), {a}, [factor](Node& o, std::span<Node* const> in) {
      if (!in[0]->requires_grad) return;
      for (std::size_t i = 0; i < o.grad->size(); ++i) (*in[0]->grad)[i] += factor * (*o.grad)[i];
    });
  }

  Var sigmoid(Var a) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = logistic(out[i]);
    const double sign = fault_ == Fault::flip_sigmoid_grad ? -1.0 : 1.0;
    return record(std::move(out), {a}, [sign](Node& o, std::span<Node* const> in) {
      if (!in[0]->requires_grad) return;
      const Tensor& y = *o.value;
      for (std::size_t i = 0; i < y.size(); ++i) (*in[0]->grad)[i] += sign * (*o.grad)[i] * y[i] * (1.0 - y[i]);
    });
  }

  Var tanh(Var a) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    return record(std::move(out), {a}, [](Node& o, std::span<Node* const> in) {
      if (!in[0]->requires_grad) return;
      const Tensor& y = *o.value;
      for (std::size_t i = 0; i < y.size(); ++i) (*in[0]->grad)[i] += (*o.grad)[i] * (1.0 - y[i] * y[i]);
    });
  }

  /// Left-to-right sum. An empty list yields zeros of shape (rows, 1).
  Var sum_list(std::span<const Var> items, std::size_t rows) {
    Tensor out(rows, 1);
    for (Var v : items) {
      const Tensor& t = value(v);
      if (t.rows() != rows || t.cols() != 1)
        throw Error(Errc::shape_mismatch, "sum_list expected (" + std::to_string(rows) + ", 1), got " +
                                              t.shape_string());
      for (std::size_t i = 0; i < rows; ++i) out[i] += t[i];
    }
    return record(std::move(out), items, [](Node& o, std::span<Node* const> in) {
      for (Node* n : in)
        if (n->requires_grad) accumulate(*n->grad, *o.grad);
    });
  }

  Var mean_list(std::span<const Var> items, std::size_t rows) {
    if (items.empty()) throw Error(Errc::shape_mismatch, "mean of an empty list");
    return scale(sum_list(items, rows), 1.0 / static_cast<double>(items.size()));
  }

  Var affine(Var w, Var x, Var b) { return add(matvec(w, x), b); }

  Var log_softmax(Var a) {
    const Tensor& A = value(a);
    if (A.cols() != 1 || A.rows() == 0)
      throw Error(Errc::shape_mismatch, "log_softmax expects a nonempty column, got " + A.shape_string());
    double m = A[0];
    for (std::size_t i = 1; i < A.size(); ++i) m = std::max(m, A[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += std::exp(A[i] - m);
    const double lse = m + std::log(s);
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lse;
    return record(std::move(out), {a}, [](Node& o, std::span<Node* const> in) {
      if (!in[0]->requires_grad) return;
      const Tensor& y = *o.value;
      const Tensor& g = *o.grad;
      double gsum = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) gsum += g[i];
      for (std::size_t i = 0; i < y.size(); ++i) (*in[0]->grad)[i] += g[i] - std::exp(y[i]) * gsum;
    });
  }

  /// Stacks column vectors.
  Var concat(std::span<const Var> items) {
    std::size_t rows = 0;
    for (Var v : items) {
      if (value(v).cols() != 1)
        throw Error(Errc::shape_mismatch, "concat expects columns, got " + value(v).shape_string());
      rows += value(v).rows();
    }
    Tensor out(rows, 1);
    std::size_t k = 0;
    for (Var v : items)
      for (double x : value(v).values()) out[k++] = x;
    return record(std::move(out), items, [](Node& o, std::span<Node* const> in) {
      std::size_t k = 0;
      for (Node* n : in) {
        const std::size_t len = n->value->size();
        if (n->requires_grad)
          for (std::size_t i = 0; i < len; ++i) (*n->grad)[i] += (*o.grad)[k + i];
        k += len;
      }
    });
  }

  /// Scalar holding entry i of a column.
  Var pick(Var a, std::size_t i) {
    const Tensor& A = value(a);
    if (i >= A.size()) throw Error(Errc::shape_mismatch, "pick index " + std::to_string(i) + " out of range");
    return record(Tensor::scalar(A[i]), {a}, [i](Node& o, std::span<Node* const> in) {
      if (in[0]->requires_grad) (*in[0]->grad)[i] += (*o.grad)[0];
    });
  }

  /// Column j of a matrix, as a column vector.
  Var column(Var w, std::size_t j) {
    const Tensor& W = value(w);
    if (j >= W.cols()) throw Error(Errc::shape_mismatch, "column " + std::to_string(j) + " out of range");
    Tensor out(W.rows(), 1);
    for (std::size_t r = 0; r < W.rows(); ++r) out[r] = W(r, j);
    return record(std::move(out), {w}, [j](Node& o, std::span<Node* const> in) {
      if (!in[0]->requires_grad) return;
      Tensor& gw = *in[0]->grad;
      for (std::size_t r = 0; r < gw.rows(); ++r) gw(r, j) += (*o.grad)[r];
    });
  }

  /// Scalar sum of all entries.
  Var sum(Var a) {
    double s = 0.0;
    for (double x : value(a).values()) s += x;
    return record(Tensor::scalar(s), {a}, [](Node& o, std::span<Node* const> in) {
      if (!in[0]->requires_grad) return;
      for (double& g : in[0]->grad->values()) g += (*o.grad)[0];
    });
  }

  /// Binary cross-entropy of sigmoid(z) against target y in [0, 1],
  /// evaluated stably from the logit: softplus(z) - y z.
  Var bce_with_logit(Var z, double y) {
    const Tensor& Z = value(z);
    if (!Z.is_scalar()) throw Error(Errc::shape_mismatch, "bce_with_logit expects a scalar logit");
    const double x = Z[0];
    const double softplus = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    return record(Tensor::scalar(softplus - y * x), {z}, [x, y](Node& o, std::span<Node* const> in) {
      if (in[0]->requires_grad) (*in[0]->grad)[0] += (*o.grad)[0] * (logistic(x) - y);
    });
  }

  /// lambda * sum of squared entries over the regularized parameters.
  /// Reads and accumulates into the parameters directly.
  Var l2_penalty(std::span<Parameter* const> params, double lambda) {
    double s = 0.0;
    std::vector<Parameter*> used;
    for (Parameter* p : params) {
      if (!p->regularized) continue;
      used.push_back(p);
      for (double v : p->value.values()) s += v * v;
    }
    Node& n = push();
    n.own_value = Tensor::scalar(lambda * s);
    n.value = &n.own_value;
    n.own_grad = Tensor(1, 1);
    n.grad = &n.own_grad;
    n.requires_grad = lambda != 0.0 && !used.empty();
    if (n.requires_grad) {
      n.backward = [used, lambda](Node& o, std::span<Node* const>) {
        const double g = 2.0 * lambda * (*o.grad)[0];
        for (Parameter* p : used)
          for (std::size_t i = 0; i < p->value.size(); ++i) p->grad[i] += g * p->value[i];
      };
    }
    return Var{nodes_.size() - 1};
  }

  /// Accumulates d(loss)/d(parameter) into every bound parameter's grad.
  /// Intermediate gradients are reset first, so calling backward twice
  /// doubles the parameter accumulators.
  void backward(Var loss) {
    if (!value(loss).is_scalar())
      throw Error(Errc::non_scalar_loss, "loss has shape " + value(loss).shape_string());
    for (Node& n : nodes_)
      if (!n.is_parameter && n.grad) n.grad->set_zero();
    Node& root = nodes_[loss.id];
    if (!root.requires_grad) return;
    (*root.grad)[0] += 1.0;
    std::vector<Node*> inputs;
    for (std::size_t k = loss.id + 1; k-- > 0;) {
      Node& n = nodes_[k];
      if (!n.requires_grad || !n.backward) continue;
      inputs.clear();
      for (std::size_t id : n.inputs) inputs.push_back(&nodes_[id]);
      n.backward(n, inputs);
    }
  }

  static double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

 private:
  struct Node {
    Tensor own_value;
    Tensor own_grad;
    const Tensor* value = nullptr;
    Tensor* grad = nullptr;
    std::vector<std::size_t> inputs;
    std::function<void(Node&, std::span<Node* const>)> backward;
    bool requires_grad = false;
    bool is_parameter = false;
  };

  Node& push() { return nodes_.emplace_back(); }

  template <class Rule>
  Var record(Tensor out, std::initializer_list<Var> in, Rule&& rule) {
    return record(std::move(out), std::span<const Var>(in.begin(), in.size()), std::forward<Rule>(rule));
  }

  template <class Rule>
  Var record(Tensor out, std::span<const Var> in, Rule&& rule) {
    out.require_finite();
    bool needs = false;
    for (Var v : in) needs = needs || nodes_[v.id].requires_grad;
    Node& n = push();
    n.own_value = std::move(out);
    n.value = &n.own_value;
    if (needs) {
      n.requires_grad = true;
      n.own_grad = Tensor(n.own_value.rows(), n.own_value.cols());
      n.grad = &n.own_grad;
      n.inputs.reserve(in.size());
      for (Var v : in) n.inputs.push_back(v.id);
      n.backward = std::forward<Rule>(rule);
    }
    return Var{nodes_.size() - 1};
  }

  static void accumulate(Tensor& into, const Tensor& from) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
  }

  static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
      throw Error(Errc::shape_mismatch, std::string(op) + " expected " + a.shape_string() + ", got " +
                                            b.shape_string());
  }

  std::deque<Node> nodes_;
  Fault fault_;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  double tolerance = 0.0;
  bool passed = true;
};

/// Magnitudes below this are compared absolutely: central differences with
/// a 1e-5 step carry roughly 1e-10 of rounding noise on an O(1) loss, so
/// relative error is meaningless for gradient entries near that size.
inline constexpr double kGradCheckFloor = 1e-5;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
}

/// Compares backward() against central finite differences for every entry
/// of every parameter. `build` must construct the same scalar loss
/// deterministically from the current parameter values.
inline GradCheckReport finite_difference_check(std::span<Parameter* const> params,
                                               const std::function<Var(Graph&)>& build, double step = 1e-5,
                                               double tolerance = 1e-4, Fault fault = Fault::none) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g(fault);
    g.backward(build(g));
  }
  auto evaluate = [&] {
    Graph g;
    Var loss = build(g);
    return g.scalar(loss);
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  for (Parameter* p : params) {
    GradCheckEntry entry;
    entry.name = p->name;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double original = p->value[i];
      p->value[i] = original + step;
      const double up = evaluate();
      p->value[i] = original - step;
      const double down = evaluate();
      p->value[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad[i];
      const double err = relative_error(analytic, numeric);
      if (i == 0 || err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic = analytic;
        entry.numeric = numeric;
      }
    }
    if (entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_parameter = entry.name;
    }
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < tolerance;
  for (Parameter* p : params) p->zero_grad();
  return report;
}

}  // namespace treelstm
