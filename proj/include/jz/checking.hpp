#pragma once

#include <vector>

#include "jz/losses.hpp"

namespace jz {

enum class FillSource { U, G };

/**
 * A masked solution with the masked slots filled by one of the decoders.
 * The fill is data for the correction losses: no gradient ever flows
 * through it, because it is produced by forward-only decoding.
 */
struct FilledSolution {
  FillSource source = FillSource::U;
  std::vector<int> ids;       // [CLS] filled solution [SEP]
  std::vector<int> original;  // [CLS] original solution [SEP]
  std::vector<std::size_t> masked_positions;
};

/// Fill with the understanding decoder: argmax of its logits substituted at
/// the masked positions; everything else copied from the corrupted input
/// (non-[MASK] corruptions included).
inline FilledSolution u_fill_masked(const ModelParams& p, const CorruptedExample& ex) {
  FilledSolution f;
  f.source = FillSource::U;
  f.ids = ex.input.ids;
  f.original = ex.target.ids;
  f.masked_positions = ex.masked_positions;
  if (!ex.masked_positions.empty()) {
    Tensor logits = u_decode_logits(p, ex.input.ids);
    for (std::size_t pos : ex.masked_positions) f.ids[pos] = argmax_row(logits, pos);
  }
  return f;
}

/**
 * Fill with the generation decoder: greedy decode with the length forced to
 * the original length (argmax per step, no early stop), then splice the
 * generated tokens into the masked slots so the result stays aligned with
 * the original position by position.
 */
inline FilledSolution g_fill_masked(const ModelParams& p, const CorruptedExample& ex) {
  FilledSolution f;
  f.source = FillSource::G;
  f.ids = ex.input.ids;
  f.original = ex.target.ids;
  f.masked_positions = ex.masked_positions;
  if (ex.masked_positions.empty()) return f;
  require(f.ids.size() >= 2, "g_fill_masked: sequence too short");
  const std::size_t interior = f.ids.size() - 2;  // tokens between [CLS] and the final [SEP]
  Tape tape;
  ModelGraph g(tape, p);
  NodeId enc = g.encode_ids(ex.input.ids);
  std::vector<int> prefix = {kCls};
  std::vector<int> generated;
  generated.reserve(interior);
  for (std::size_t t = 0; t < interior; ++t) {
    const Tensor& logits = tape.value(g.g_logits(g.g_states(enc, prefix)));
    int next = argmax_row(logits, prefix.size() - 1);
    generated.push_back(next);
    prefix.push_back(next);
  }
  for (std::size_t pos : ex.masked_positions) {
    require(pos >= 1 && pos <= interior, "g_fill_masked: masked position outside the solution");
    f.ids[pos] = generated[pos - 1];
  }
  return f;
}

namespace detail {

inline std::vector<char> solution_active(const std::vector<int>& original) {
  // Every solution token is predicted; the [CLS]/[SEP] frame is not part of d.
  std::vector<char> active(original.size(), 0);
  for (std::size_t i = 0; i < original.size(); ++i)
    if (!is_structural(original[i])) active[i] = 1;
  return active;
}

/// U-decoder full-sequence correction loss against the original solution.
inline NodeId u_correction_node(ModelGraph& g, const FilledSolution& f) {
  NodeId enc = g.encode_ids(f.ids);
  NodeId logits = g.u_logits(g.u_states(enc));
  return g.tape().cross_entropy(logits, f.original, solution_active(f.original));
}

/// G-decoder teacher-forced correction loss against the original solution.
inline NodeId g_correction_node(ModelGraph& g, const FilledSolution& f) {
  std::vector<int> target(f.original.begin() + 1, f.original.end());
  return seq2seq_loss_node(g, f.ids, target);
}

}  // namespace detail

/// The understanding decoder examines and corrects the generation decoder's
/// fill, targeting the entire original solution (not just the masked part).
inline NodeId usc_loss_node(ModelGraph& g, const FilledSolution& filled) {
  require(filled.source == FillSource::G, "usc loss: fill must come from the G-decoder");
  return detail::u_correction_node(g, filled);
}

/// The generation decoder corrects the understanding decoder's fill.
inline NodeId gsc_loss_node(ModelGraph& g, const FilledSolution& filled) {
  require(filled.source == FillSource::U, "gsc loss: fill must come from the U-decoder");
  return detail::g_correction_node(g, filled);
}

/// Optional self-checking: each decoder corrects its own fill with the same
/// loss form. Config-gated; off by default.
inline NodeId self_check_node(ModelGraph& g, const FilledSolution& filled) {
  return filled.source == FillSource::U ? detail::u_correction_node(g, filled)
                                        : detail::g_correction_node(g, filled);
}

// -- scalar wrappers ----------------------------------------------------------

inline real usc_loss(const ModelParams& p, const FilledSolution& filled) {
  Tape tape;
  ModelGraph g(tape, p);
  return tape.value(usc_loss_node(g, filled)).data[0];
}

inline real gsc_loss(const ModelParams& p, const FilledSolution& filled) {
  Tape tape;
  ModelGraph g(tape, p);
  return tape.value(gsc_loss_node(g, filled)).data[0];
}

inline real self_check_pass(const ModelParams& p, const FilledSolution& filled, bool enabled) {
  if (!enabled) return 0;
  Tape tape;
  ModelGraph g(tape, p);
  return tape.value(self_check_node(g, filled)).data[0];
}

}  // namespace jz
