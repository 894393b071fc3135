#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "jz/rng.hpp"
#include "jz/vocab.hpp"

namespace jz {

enum class Kind { MLM, DAE, SSR, SFR };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::MLM: return "mlm";
    case Kind::DAE: return "dae";
    case Kind::SSR: return "ssr";
    default: return "sfr";
  }
}

enum class MaskAction { MASK, RANDOM, KEEP };

/// Per-token sampling weights plus the spans and actions chosen from them.
struct MaskingPlan {
  std::vector<real> weights;          // percent units
  std::vector<Range> selected_spans;  // ascending, disjoint
  std::vector<MaskAction> actions;    // one per selected token, span order
};

struct CorruptionOptions {
  bool bernoulli = false;  // independent per-span trials instead of the fixed 15% budget
};

/**
 * A corrupted input paired with its recovery target.
 *
 * For MLM/DAE, `input`/`target` are the full [CLS] statement [SEP] solution
 * [SEP] sequence. For SSR/SFR they are the bare solution (the loss builders
 * add specials and the statement context); `statement_ids` carries the
 * conditioning statement.
 */
struct CorruptedExample {
  Kind kind = Kind::MLM;
  TokenSequence input;
  TokenSequence target;
  std::vector<std::size_t> masked_positions;  // MLM/DAE only
  std::vector<std::size_t> permutation;       // SSR/SFR only: slot -> original index
  std::vector<int> statement_ids;             // SSR/SFR conditioning context
  bool degenerate = false;
};

/**
 * Linearly increasing masking weights: w[i] = 30*i/(n-1) in percent, so the
 * first and last positions carry 0% and 30% and the mean is 15%. A single
 * position gets the flat 15.
 */
inline std::vector<real> position_weights(std::size_t n) {
  require(n >= 1, "position_weights: n must be >= 1");
  if (n == 1) return {real(15)};
  std::vector<real> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = (real(30) * real(i)) / real(n - 1);
  return w;
}

/// The ramp laid over a token sequence: structural tokens weigh 0 and
/// content tokens take the ramp position by their content-only index, so the
/// solution half of a statement+solution input gets the larger weights.
inline std::vector<real> sequence_weights(const TokenSequence& ts) {
  std::size_t n_content = 0;
  for (int id : ts.ids)
    if (!is_structural(id)) ++n_content;
  std::vector<real> w(ts.size(), real(0));
  if (n_content == 0) return w;
  std::vector<real> ramp = position_weights(n_content);
  std::size_t j = 0;
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (!is_structural(ts.ids[i])) w[i] = ramp[j++];
  return w;
}

/// Mask budget in tokens: ceil(0.15 * n) computed exactly in integers.
inline std::size_t mask_budget(std::size_t n_content) { return (15 * n_content + 99) / 100; }

/**
 * Whole-word span selection. Candidate spans are the word spans with no
 * structural token; a span's weight is the mean of its member-token weights.
 * Default mode samples spans without replacement (probability proportional
 * to weight) until the selected token count first reaches ceil(0.15 * n),
 * where n counts content tokens only. Bernoulli mode instead keeps each span
 * independently with probability weight/100.
 */
inline std::vector<Range> select_mask_spans(const TokenSequence& ts,
                                            const std::vector<real>& weights, std::uint64_t seed,
                                            const CorruptionOptions& opts = {}) {
  require(weights.size() == ts.size(), "select_mask_spans: weight length mismatch");
  struct Candidate {
    Range span;
    real weight;
  };
  std::vector<Candidate> cands;
  std::size_t n_content = 0;
  for (const Range& r : ts.word_spans) {
    bool structural = false;
    real sum = 0;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      if (is_structural(ts.ids[i])) structural = true;
      sum += weights[i];
    }
    if (structural) continue;
    n_content += r.size();
    cands.push_back({r, sum / real(r.size())});
  }
  Rng rng(seed);
  std::vector<Range> selected;
  if (opts.bernoulli) {
    for (const Candidate& c : cands)
      if (rng.uniform() * 100 < c.weight) selected.push_back(c.span);
    return selected;
  }
  const std::size_t budget = mask_budget(n_content);
  std::vector<char> alive(cands.size(), 1);
  std::size_t picked_tokens = 0;
  while (picked_tokens < budget) {
    real total = 0;
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (alive[i]) total += cands[i].weight;
    std::size_t pick = cands.size();
    if (total > 0) {
      real r = real(rng.uniform()) * total;
      real acc = 0;
      for (std::size_t i = 0; i < cands.size(); ++i) {
        if (!alive[i]) continue;
        acc += cands[i].weight;
        if (r < acc) {
          pick = i;
          break;
        }
      }
      if (pick == cands.size()) {  // fp edge at r == total
        for (std::size_t i = cands.size(); i-- > 0;)
          if (alive[i] && cands[i].weight > 0) {
            pick = i;
            break;
          }
      }
    } else {
      // Only zero-weight spans remain; take them in position order.
      for (std::size_t i = 0; i < cands.size(); ++i)
        if (alive[i]) {
          pick = i;
          break;
        }
    }
    if (pick == cands.size()) break;  // nothing selectable
    alive[pick] = 0;
    picked_tokens += cands[pick].span.size();
    selected.push_back(cands[pick].span);
  }
  std::sort(selected.begin(), selected.end(),
            [](const Range& a, const Range& b) { return a.begin < b.begin; });
  return selected;
}

/**
 * 80/10/10 corruption of the selected spans: [MASK] / random non-reserved
 * token / unchanged. Every selected position lands in masked_positions (a
 * kept token is still predicted). If the vocabulary has no non-reserved
 * token the RANDOM branch falls back to [MASK].
 */
inline CorruptedExample apply_token_corruption(const TokenSequence& ts,
                                               const std::vector<Range>& spans, const Vocab& vocab,
                                               std::uint64_t seed, Kind kind = Kind::MLM) {
  CorruptedExample ex;
  ex.kind = kind;
  ex.input = ts;
  ex.target = ts;
  Rng rng(seed);
  const std::size_t n_regular = vocab.size() - kReservedTokens.size();
  for (const Range& r : spans) {
    for (std::size_t i = r.begin; i < r.end; ++i) {
      require(i < ts.size(), "apply_token_corruption: span out of range");
      double u = rng.uniform();
      MaskAction act = u < 0.8 ? MaskAction::MASK : (u < 0.9 ? MaskAction::RANDOM : MaskAction::KEEP);
      if (act == MaskAction::RANDOM && n_regular == 0) act = MaskAction::MASK;
      switch (act) {
        case MaskAction::MASK:
          ex.input.ids[i] = kMask;
          break;
        case MaskAction::RANDOM:
          ex.input.ids[i] =
              static_cast<int>(kReservedTokens.size() + rng.uniform_int(n_regular));
          break;
        case MaskAction::KEEP:
          break;
      }
      ex.masked_positions.push_back(i);
    }
  }
  std::sort(ex.masked_positions.begin(), ex.masked_positions.end());
  return ex;
}

/// Full masking pipeline for one already-encoded sequence.
inline CorruptedExample make_masked_example(const TokenSequence& ts, const Vocab& vocab,
                                            std::uint64_t seed, Kind kind,
                                            const CorruptionOptions& opts = {}) {
  std::vector<real> w = sequence_weights(ts);
  std::vector<Range> spans = select_mask_spans(ts, w, Rng::mix(seed, 1), opts);
  return apply_token_corruption(ts, spans, vocab, Rng::mix(seed, 2), kind);
}

namespace detail {

/// Uniform permutation of {0..n-1}; uniform over non-identity ones when
/// n >= 2 (an identity shuffle carries no learning signal).
inline std::vector<std::size_t> non_identity_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  if (n < 2) return perm;
  auto is_identity = [&] {
    for (std::size_t i = 0; i < n; ++i)
      if (perm[i] != i) return false;
    return true;
  };
  do {
    rng.shuffle(perm);
  } while (is_identity());
  return perm;
}

}  // namespace detail

/// Shuffle the order of the solution's sentences; the target is the original
/// solution. One sentence shuffles to itself.
inline CorruptedExample shuffle_sentences(const MathText& mt, const Vocab& vocab,
                                          std::uint64_t seed) {
  require(!mt.sentences.empty(), "shuffle_sentences: no sentences");
  Rng rng(seed);
  std::vector<std::size_t> perm = detail::non_identity_permutation(mt.sentences.size(), rng);
  std::vector<std::string> shuffled;
  shuffled.reserve(mt.solution.size());
  for (std::size_t slot = 0; slot < perm.size(); ++slot) {
    const Range& r = mt.sentences[perm[slot]];
    for (std::size_t i = r.begin; i < r.end; ++i) shuffled.push_back(mt.solution[i]);
  }
  CorruptedExample ex;
  ex.kind = Kind::SSR;
  ex.input = encode(shuffled, vocab);
  ex.target = encode(mt.solution, vocab);
  ex.permutation = std::move(perm);
  ex.statement_ids = encode(mt.statement, vocab).ids;
  return ex;
}

/// Permute the formula span *contents* among the span slots; prose and the
/// $ delimiters stay in place. Unequal span lengths shift the surrounding
/// indices, which is why the corrupted text is rebuilt word by word.
inline CorruptedExample shuffle_formulas(const MathText& mt, const Vocab& vocab,
                                         std::uint64_t seed) {
  CorruptedExample ex;
  ex.kind = Kind::SFR;
  ex.target = encode(mt.solution, vocab);
  ex.statement_ids = encode(mt.statement, vocab).ids;
  const std::size_t m = mt.formulas.size();
  if (m == 0) {
    ex.input = ex.target;
    ex.degenerate = true;
    return ex;
  }
  Rng rng(seed);
  ex.permutation = detail::non_identity_permutation(m, rng);
  std::vector<std::string> shuffled;
  shuffled.reserve(mt.solution.size());
  std::size_t next_slot = 0;
  std::size_t i = 0;
  while (i < mt.solution.size()) {
    if (next_slot < m && i == mt.formulas[next_slot].start) {
      const FormulaSpan& src = mt.formulas[ex.permutation[next_slot]];
      for (const std::string& sym : src.symbols) shuffled.push_back(sym);
      i = mt.formulas[next_slot].end;
      ++next_slot;
    } else {
      shuffled.push_back(mt.solution[i]);
      ++i;
    }
  }
  ex.input = encode(shuffled, vocab);
  return ex;
}

/// JSON-Lines form used by `preprocess --emit-corruptions`.
inline nlohmann::json corruption_to_json(const CorruptedExample& ex) {
  nlohmann::json j;
  j["kind"] = kind_name(ex.kind);
  j["input"] = ex.input.ids;
  j["target"] = ex.target.ids;
  j["masked_positions"] = ex.masked_positions;
  j["permutation"] = ex.permutation;
  return j;
}

}  // namespace jz
