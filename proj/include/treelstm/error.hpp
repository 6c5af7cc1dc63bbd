#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace treelstm {

enum class Errc {
  // tree_core
  empty_tree,
  multiple_roots,
  cycle_detected,
  outdegree_exceeded,
  inconsistent_edges,
  // tensor_engine
  shape_mismatch,
  non_finite,
  non_scalar_loss,
  // cells
  arity_exceeded,
  direction_mismatch,
  // transduction / training
  empty_mask,
  label_out_of_range,
  zero_compression,
  empty_split,
  // metrics
  empty_input,
  length_mismatch,
  skeleton_mismatch,
  empty_reference,
  empty_original,
  // data_io
  unbalanced_parens,
  escape_error,
  bad_class,
  empty_corpus,
  dimension_mismatch,
  duplicate_token,
  bad_format,
  // checkpoints
  checkpoint_mismatch,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::empty_tree: return "EmptyTree";
    case Errc::multiple_roots: return "MultipleRoots";
    case Errc::cycle_detected: return "CycleDetected";
    case Errc::outdegree_exceeded: return "OutdegreeExceeded";
    case Errc::inconsistent_edges: return "InconsistentEdges";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite: return "NonFinite";
    case Errc::non_scalar_loss: return "NonScalarLoss";
    case Errc::arity_exceeded: return "ArityExceeded";
    case Errc::direction_mismatch: return "DirectionMismatch";
    case Errc::empty_mask: return "EmptyMask";
    case Errc::label_out_of_range: return "LabelOutOfRange";
    case Errc::zero_compression: return "ZeroCompression";
    case Errc::empty_split: return "EmptySplit";
    case Errc::empty_input: return "EmptyInput";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::skeleton_mismatch: return "SkeletonMismatch";
    case Errc::empty_reference: return "EmptyReference";
    case Errc::empty_original: return "EmptyOriginal";
    case Errc::unbalanced_parens: return "UnbalancedParens";
    case Errc::escape_error: return "EscapeError";
    case Errc::bad_class: return "BadClass";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::duplicate_token: return "DuplicateToken";
    case Errc::bad_format: return "BadFormat";
    case Errc::checkpoint_mismatch: return "CheckpointMismatch";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind rather than the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace treelstm
