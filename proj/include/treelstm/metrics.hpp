#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "treelstm/error.hpp"
#include "treelstm/tree.hpp"

namespace treelstm {

/// Compression rate of the gold-standard compressions of the CLWritten
/// corpus, for report captions.
inline constexpr double kGoldCompressionRate = 0.7041;

template <class T>
double classification_accuracy(std::span<const T> predicted, std::span<const T> target) {
  if (predicted.empty()) throw Error(Errc::empty_input, "no predictions");
  if (predicted.size() != target.size())
    throw Error(Errc::length_mismatch, std::to_string(predicted.size()) + " predictions for " +
                                           std::to_string(target.size()) + " targets");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == target[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

/// Fraction of masked nodes whose labels agree, for one pair of trees.
template <class Label>
double node_label_accuracy(const Tree<Label>& predicted, const Tree<Label>& target, std::span<const NodeId> mask) {
  if (!is_isomorphic(predicted, target, true))
    throw Error(Errc::skeleton_mismatch, "predicted and target trees differ in shape");
  if (mask.empty()) throw Error(Errc::empty_mask, "no target nodes");
  std::size_t hits = 0;
  for (NodeId u : mask) hits += predicted.label(u) == target.label(u);
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

/// Per-tree proportions averaged over trees.
template <class Label>
double node_label_accuracy(std::span<const Tree<Label>> predicted, std::span<const Tree<Label>> target,
                           std::span<const std::vector<NodeId>> masks) {
  if (predicted.empty()) throw Error(Errc::empty_input, "no trees");
  if (predicted.size() != target.size() || predicted.size() != masks.size())
    throw Error(Errc::length_mismatch, "tree, target and mask counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) total += node_label_accuracy(predicted[i], target[i], masks[i]);
  return total / static_cast<double>(predicted.size());
}

/// Unit-cost token edit distance (insertions + deletions + substitutions).
template <class T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Simple String Accuracy: max(0, 1 - edits / |reference|).
template <class T>
double ssa(std::span<const T> candidate, std::span<const T> reference) {
  if (reference.empty()) throw Error(Errc::empty_reference, "SSA needs a nonempty reference");
  const double d = static_cast<double>(edit_distance(candidate, reference));
  return std::max(0.0, 1.0 - d / static_cast<double>(reference.size()));
}

template <class T>
double ssa(const std::vector<T>& candidate, const std::vector<T>& reference) {
  return ssa(std::span<const T>(candidate), std::span<const T>(reference));
}

inline double compression_rate(std::size_t compressed, std::size_t original) {
  if (original == 0) throw Error(Errc::empty_original, "original length is zero");
  return static_cast<double>(compressed) / static_cast<double>(original);
}

/// t = accuracy^2 / compression rate; trades accuracy against compression.
inline double hybrid_metric(double accuracy, double compression) {
  if (compression <= 0.0) throw Error(Errc::zero_compression, "compression rate must be positive");
  return accuracy * accuracy / compression;
}

/// One metric over repeated runs.
struct EvalReport {
  std::string metric;
  std::size_t samples = 0;
  std::vector<double> runs;

  double mean() const {
    if (runs.empty()) return 0.0;
    double s = 0.0;
    for (double v : runs) s += v;
    return s / static_cast<double>(runs.size());
  }
};

/// Tab-separated table: one row per run, then a mean row.
inline void write_report_table(std::ostream& out, std::span<const EvalReport> columns) {
  out << "run";
  for (const auto& c : columns) out << '\t' << c.metric;
  out << '\n';
  const std::size_t n = columns.empty() ? 0 : columns.front().runs.size();
  auto cell = [&](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out << '\t' << buf;
  };
  for (std::size_t r = 0; r < n; ++r) {
    out << r + 1;
    for (const auto& c : columns) cell(c.runs.at(r));
    out << '\n';
  }
  out << "mean";
  for (const auto& c : columns) cell(c.mean());
  out << '\n';
}

}  // namespace treelstm
