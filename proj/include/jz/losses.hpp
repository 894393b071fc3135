#pragma once

#include <vector>

#include "jz/corruption.hpp"
#include "jz/model.hpp"

namespace jz {

inline std::vector<int> wrap_cls_sep(const std::vector<int>& ids) {
  std::vector<int> out;
  out.reserve(ids.size() + 2);
  out.push_back(kCls);
  out.insert(out.end(), ids.begin(), ids.end());
  out.push_back(kSep);
  return out;
}

/// [CLS] context [SEP] body [SEP]; context may be empty ([CLS] body [SEP]).
inline std::vector<int> wrap_with_context(const std::vector<int>& context,
                                          const std::vector<int>& body) {
  std::vector<int> out;
  out.reserve(context.size() + body.size() + 3);
  out.push_back(kCls);
  if (!context.empty()) {
    out.insert(out.end(), context.begin(), context.end());
    out.push_back(kSep);
  }
  out.insert(out.end(), body.begin(), body.end());
  out.push_back(kSep);
  return out;
}

/**
 * Teacher-forced sequence loss: encode `enc_ids`, then score the target
 * sequence with the generation decoder. Positions with active=false (or all
 * positions when `active` is empty) are excluded from the mean.
 */
inline NodeId seq2seq_loss_node(ModelGraph& g, const std::vector<int>& enc_ids,
                                const std::vector<int>& target_seq,
                                std::vector<char> active = {}) {
  require(!target_seq.empty(), "seq2seq loss: empty target");
  NodeId enc = g.encode_ids(enc_ids);
  std::vector<int> prefix;
  prefix.reserve(target_seq.size());
  prefix.push_back(kCls);
  prefix.insert(prefix.end(), target_seq.begin(), target_seq.end() - 1);
  NodeId logits = g.g_logits(g.g_states(enc, prefix));
  if (active.empty()) active.assign(target_seq.size(), 1);
  return g.tape().cross_entropy(logits, target_seq, std::move(active));
}

/// Masked-token prediction: understanding-decoder cross-entropy at the
/// masked positions only. Returns -1 when nothing was masked (the example
/// contributes zero).
inline NodeId mlm_loss_node(ModelGraph& g, const CorruptedExample& ex) {
  require(ex.kind == Kind::MLM || ex.kind == Kind::DAE, "mlm loss: wrong example kind");
  if (ex.masked_positions.empty()) return -1;
  NodeId enc = g.encode_ids(ex.input.ids);
  NodeId logits = g.u_logits(g.u_states(enc));
  std::vector<char> active(ex.input.size(), 0);
  for (std::size_t pos : ex.masked_positions) active[pos] = 1;
  return g.tape().cross_entropy(logits, ex.target.ids, std::move(active));
}

/// Denoising reconstruction: the generation decoder rebuilds the whole
/// original sequence (not just the masked part) from the corrupted input.
inline NodeId dae_loss_node(ModelGraph& g, const CorruptedExample& ex) {
  require(ex.kind == Kind::DAE || ex.kind == Kind::MLM, "dae loss: wrong example kind");
  // Target drops the leading [CLS]; the final [SEP] is the stop symbol.
  std::vector<int> target(ex.target.ids.begin() + 1, ex.target.ids.end());
  return seq2seq_loss_node(g, ex.input.ids, target);
}

/// Shuffled-sentences recovering: regenerate the original solution from the
/// statement plus the sentence-shuffled solution.
inline NodeId ssr_loss_node(ModelGraph& g, const CorruptedExample& ex,
                            bool include_statement = true) {
  require(ex.kind == Kind::SSR, "ssr loss: wrong example kind");
  std::vector<int> enc_ids = wrap_with_context(
      include_statement ? ex.statement_ids : std::vector<int>{}, ex.input.ids);
  std::vector<int> target = ex.target.ids;
  target.push_back(kSep);
  return seq2seq_loss_node(g, enc_ids, target);
}

/// Shuffled-formulas recovering; contract identical to SSR.
inline NodeId sfr_loss_node(ModelGraph& g, const CorruptedExample& ex,
                            bool include_statement = true) {
  require(ex.kind == Kind::SFR, "sfr loss: wrong example kind");
  std::vector<int> enc_ids = wrap_with_context(
      include_statement ? ex.statement_ids : std::vector<int>{}, ex.input.ids);
  std::vector<int> target = ex.target.ids;
  target.push_back(kSep);
  return seq2seq_loss_node(g, enc_ids, target);
}

// -- scalar wrappers (forward only) ------------------------------------------

inline real mlm_loss(const ModelParams& p, const CorruptedExample& ex) {
  Tape tape;
  ModelGraph g(tape, p);
  NodeId n = mlm_loss_node(g, ex);
  return n < 0 ? real(0) : tape.value(n).data[0];
}

inline real dae_loss(const ModelParams& p, const CorruptedExample& ex) {
  Tape tape;
  ModelGraph g(tape, p);
  return tape.value(dae_loss_node(g, ex)).data[0];
}

inline real ssr_loss(const ModelParams& p, const CorruptedExample& ex,
                     bool include_statement = true) {
  Tape tape;
  ModelGraph g(tape, p);
  return tape.value(ssr_loss_node(g, ex, include_statement)).data[0];
}

inline real sfr_loss(const ModelParams& p, const CorruptedExample& ex,
                     bool include_statement = true) {
  Tape tape;
  ModelGraph g(tape, p);
  return tape.value(sfr_loss_node(g, ex, include_statement)).data[0];
}

}  // namespace jz
