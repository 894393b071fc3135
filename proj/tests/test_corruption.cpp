#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "jz/corruption.hpp"

using namespace jz;
using Catch::Matchers::WithinAbs;

namespace {

TokenSequence singleton_sequence(std::size_t n) {
  TokenSequence ts;
  for (std::size_t i = 0; i < n; ++i) ts.push_word(static_cast<int>(5 + i % 40), false);
  return ts;
}

Vocab synth_vocab() {
  static Vocab v = build_vocab(generate_synthetic_corpus(16, 77), 400);
  return v;
}

// hand-trace fixtures use letter tokens; give them a vocabulary of their own
Vocab letters_vocab() {
  static Vocab v = Vocab::from_tokens({"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]", "$", ".",
                                       "+", "1", "a", "b", "c", "done", "just", "one", "plain",
                                       "q", "sentence", "then", "words", "x"});
  return v;
}

}  // namespace

TEST_CASE("position weights boundary and interior values") {
  REQUIRE(position_weights(2) == std::vector<real>{0, 30});
  std::vector<real> w3 = position_weights(3);
  REQUIRE(w3[0] == real(0));
  REQUIRE_THAT(double(w3[1]), WithinAbs(15.0, 1e-12));
  REQUIRE(w3[2] == real(30));
  REQUIRE(position_weights(1) == std::vector<real>{15});
  REQUIRE_THROWS_AS(position_weights(0), Error);
}

TEST_CASE("position weights: linearity, endpoints and mean 15") {
  for (std::size_t n : {2, 5, 8, 33, 101, 257}) {
    std::vector<real> w = position_weights(n);
    REQUIRE(w.front() == real(0));
    REQUIRE(w.back() == real(30));
    real mean = 0;
    for (real v : w) mean += v;
    mean /= real(n);
    REQUIRE_THAT(double(mean), WithinAbs(15.0, 1e-12));
    real delta = w[1] - w[0];
    for (std::size_t i = 1; i + 1 < n; ++i)
      REQUIRE_THAT(double(w[i + 1] - w[i]), WithinAbs(double(delta), 1e-12));
  }
}

TEST_CASE("sequence weights skip structural tokens") {
  TokenSequence ts;
  ts.push_word(kCls, false);
  ts.push_word(5, false);
  ts.push_word(6, false);
  ts.push_word(kSep, false);
  ts.push_word(7, false);
  ts.push_word(kSep, false);
  std::vector<real> w = sequence_weights(ts);
  REQUIRE(w[0] == real(0));
  REQUIRE(w[3] == real(0));
  REQUIRE(w[5] == real(0));
  REQUIRE(w[1] == real(0));                       // first content position
  REQUIRE_THAT(double(w[2]), WithinAbs(15.0, 1e-12));  // middle of 3 content tokens
  REQUIRE(w[4] == real(30));                      // last content position
}

TEST_CASE("uniform weights select exactly the 15 percent budget") {
  TokenSequence ts = singleton_sequence(100);
  std::vector<real> w(100, real(1));
  std::vector<Range> spans = select_mask_spans(ts, w, 123);
  std::size_t total = 0;
  for (const Range& r : spans) total += r.size();
  REQUIRE(total == 15);
}

TEST_CASE("selection frequency increases with position under the ramp") {
  const std::size_t n = 20;
  TokenSequence ts = singleton_sequence(n);
  std::vector<real> w = sequence_weights(ts);
  const int trials = 20000;
  std::vector<double> freq(n, 0);
  for (int t = 0; t < trials; ++t) {
    for (const Range& r : select_mask_spans(ts, w, Rng::mix(0x5e1, t)))
      for (std::size_t i = r.begin; i < r.end; ++i) freq[i] += 1;
  }
  // strictly increasing in expectation; allow small Monte-Carlo wiggle by
  // checking rank agreement instead of raw monotonicity
  int inversions = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      if (freq[i] > freq[j]) ++inversions;
    }
  REQUIRE(double(inversions) / pairs < 0.025);  // rank correlation > 0.95
  REQUIRE(freq[0] == 0);                        // zero weight is never selected
}

TEST_CASE("span selection is deterministic under the seed") {
  TokenSequence ts = singleton_sequence(37);
  std::vector<real> w = sequence_weights(ts);
  REQUIRE(select_mask_spans(ts, w, 99) == select_mask_spans(ts, w, 99));
}

TEST_CASE("structural spans are never selected and words never split") {
  // build a sequence with [CLS]/[SEP] and a three-token word
  TokenSequence ts;
  ts.push_word(kCls, false);
  for (int i = 0; i < 6; ++i) ts.push_word(10 + i, false);
  ts.word_spans.push_back({ts.ids.size(), ts.ids.size() + 3});
  ts.ids.insert(ts.ids.end(), {20, 21, 22});
  ts.is_math.insert(ts.is_math.end(), {1, 1, 1});
  ts.push_word(kSep, false);
  std::vector<real> w = sequence_weights(ts);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Range> spans = select_mask_spans(ts, w, Rng::mix(7, trial));
    for (const Range& r : spans) {
      bool whole_word = false;
      for (const Range& ws : ts.word_spans) whole_word = whole_word || ws == r;
      REQUIRE(whole_word);
      for (std::size_t i = r.begin; i < r.end; ++i) REQUIRE_FALSE(is_structural(ts.ids[i]));
    }
  }
}

TEST_CASE("bernoulli mode respects per-span probabilities") {
  TokenSequence ts = singleton_sequence(2);
  std::vector<real> w = {0, 100};
  CorruptionOptions opts;
  opts.bernoulli = true;
  for (int t = 0; t < 50; ++t) {
    std::vector<Range> spans = select_mask_spans(ts, w, Rng::mix(3, t), opts);
    REQUIRE(spans.size() == 1);  // weight 100 always kept, weight 0 never
    REQUIRE(spans[0].begin == 1);
  }
}

TEST_CASE("corruption actions follow the 80/10/10 split") {
  Vocab vocab = synth_vocab();
  TokenSequence ts = singleton_sequence(50);
  std::vector<Range> all_spans = ts.word_spans;
  std::size_t n_mask = 0, n_random = 0, n_keep = 0, total = 0;
  for (int t = 0; total < 100000; ++t) {
    CorruptedExample ex = apply_token_corruption(ts, all_spans, vocab, Rng::mix(0xabc, t));
    for (std::size_t pos : ex.masked_positions) {
      ++total;
      if (ex.input.ids[pos] == kMask)
        ++n_mask;
      else if (ex.input.ids[pos] == ex.target.ids[pos])
        ++n_keep;
      else
        ++n_random;
    }
  }
  REQUIRE_THAT(double(n_mask) / double(total), WithinAbs(0.80, 0.01));
  REQUIRE_THAT(double(n_random) / double(total), WithinAbs(0.10, 0.01));
  REQUIRE_THAT(double(n_keep) / double(total), WithinAbs(0.10, 0.01));
}

TEST_CASE("kept tokens still count as masked positions") {
  Vocab vocab = synth_vocab();
  TokenSequence ts = singleton_sequence(40);
  CorruptedExample ex = apply_token_corruption(ts, ts.word_spans, vocab, 5);
  REQUIRE(ex.masked_positions.size() == ts.size());  // every span selected here
  bool any_kept = false;
  for (std::size_t pos : ex.masked_positions)
    any_kept = any_kept || ex.input.ids[pos] == ex.target.ids[pos];
  REQUIRE(any_kept);
}

TEST_CASE("empty selection leaves the input untouched") {
  Vocab vocab = synth_vocab();
  TokenSequence ts = singleton_sequence(10);
  CorruptedExample ex = apply_token_corruption(ts, {}, vocab, 5);
  REQUIRE(ex.input.ids == ex.target.ids);
  REQUIRE(ex.masked_positions.empty());
}

TEST_CASE("random replacement falls back to MASK with no regular tokens") {
  Vocab tiny = Vocab::from_tokens({"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"});
  TokenSequence ts;
  for (int i = 0; i < 30; ++i) ts.push_word(kUnk, false);
  CorruptedExample ex = apply_token_corruption(ts, ts.word_spans, tiny, 5);
  for (std::size_t pos : ex.masked_positions) {
    bool mask_or_keep = ex.input.ids[pos] == kMask || ex.input.ids[pos] == kUnk;
    REQUIRE(mask_or_keep);
  }
}

TEST_CASE("single-sentence shuffle is the identity") {
  Vocab vocab = letters_vocab();
  MathText mt;
  mt.id = "one";
  mt.statement = {"q"};
  mt.solution = {"just", "one", "sentence"};
  annotate(mt);
  CorruptedExample ex = shuffle_sentences(mt, vocab, 3);
  REQUIRE(ex.input.ids == ex.target.ids);
  REQUIRE(ex.permutation == std::vector<std::size_t>{0});
}

TEST_CASE("two sentences always swap") {
  Vocab vocab = letters_vocab();
  MathText mt;
  mt.id = "two";
  mt.statement = {"q"};
  mt.solution = {"a", ".", "b", "."};
  annotate(mt);
  for (int t = 0; t < 20; ++t) {
    CorruptedExample ex = shuffle_sentences(mt, vocab, Rng::mix(11, t));
    REQUIRE(ex.permutation == std::vector<std::size_t>{1, 0});
    REQUIRE(decode(ex.input, vocab) == std::vector<std::string>{"b", ".", "a", "."});
  }
}

TEST_CASE("three-sentence shuffles are uniform over the five non-identity orders") {
  Vocab vocab = letters_vocab();
  MathText mt;
  mt.id = "three";
  mt.statement = {"q"};
  mt.solution = {"a", ".", "b", ".", "c", "."};
  annotate(mt);
  std::map<std::vector<std::size_t>, int> counts;
  const int trials = 60000;
  for (int t = 0; t < trials; ++t)
    ++counts[shuffle_sentences(mt, vocab, Rng::mix(0x355, t)).permutation];
  REQUIRE(counts.size() == 5);
  for (const auto& [perm, n] : counts)
    REQUIRE_THAT(double(n) / trials, WithinAbs(0.2, 0.01));
}

TEST_CASE("inverse sentence permutation reconstructs the original") {
  CorpusFile corpus = generate_synthetic_corpus(10, 123);
  Vocab vocab = build_vocab(corpus, 1024);
  for (std::size_t ri = 0; ri < corpus.records.size(); ++ri) {
    const MathText& mt = corpus.records[ri];
    CorruptedExample ex = shuffle_sentences(mt, vocab, Rng::mix(1, ri));
    // rebuild by placing each shuffled block back at its original slot
    std::vector<int> rebuilt(ex.target.ids.size());
    std::size_t cursor = 0;
    for (std::size_t slot = 0; slot < ex.permutation.size(); ++slot) {
      const Range& original = mt.sentences[ex.permutation[slot]];
      for (std::size_t k = 0; k < original.size(); ++k)
        rebuilt[original.begin + k] = ex.input.ids[cursor + k];
      cursor += original.size();
    }
    REQUIRE(rebuilt == ex.target.ids);
  }
}

TEST_CASE("single-formula shuffle is the identity") {
  Vocab vocab = letters_vocab();
  MathText mt;
  mt.id = "f1";
  mt.statement = {"q"};
  mt.solution = {"$", "x", "$", "done", "."};
  annotate(mt);
  CorruptedExample ex = shuffle_formulas(mt, vocab, 3);
  REQUIRE(ex.input.ids == ex.target.ids);
  REQUIRE_FALSE(ex.degenerate);
}

TEST_CASE("zero formulas yields a degenerate identity example") {
  Vocab vocab = letters_vocab();
  MathText mt;
  mt.id = "f0";
  mt.statement = {"q"};
  mt.solution = {"plain", "words", "."};
  annotate(mt);
  CorruptedExample ex = shuffle_formulas(mt, vocab, 3);
  REQUIRE(ex.degenerate);
  REQUIRE(ex.input.ids == ex.target.ids);
}

TEST_CASE("unequal-length formula contents swap while prose stays put") {
  Vocab vocab = letters_vocab();
  MathText mt;
  mt.id = "swap";
  mt.statement = {"q"};
  mt.solution = {"$", "a", "+", "1", "$", "then", "$", "b", "$", "."};
  annotate(mt);
  REQUIRE(mt.formulas.size() == 2);
  CorruptedExample ex = shuffle_formulas(mt, vocab, 4);
  REQUIRE(ex.permutation == std::vector<std::size_t>{1, 0});
  REQUIRE(decode(ex.input, vocab) ==
          std::vector<std::string>{"$", "b", "$", "then", "$", "a", "+", "1", "$", "."});
}

TEST_CASE("formula shuffling conserves the token multiset") {
  CorpusFile corpus = generate_synthetic_corpus(12, 55);
  Vocab vocab = build_vocab(corpus, 1024);
  for (std::size_t ri = 0; ri < corpus.records.size(); ++ri) {
    CorruptedExample ex = shuffle_formulas(corpus.records[ri], vocab, Rng::mix(2, ri));
    std::vector<int> in = ex.input.ids, tg = ex.target.ids;
    std::sort(in.begin(), in.end());
    std::sort(tg.begin(), tg.end());
    REQUIRE(in == tg);
    REQUIRE(ex.input.ids.size() == ex.target.ids.size());
  }
}

TEST_CASE("inverse formula permutation reconstructs the original") {
  CorpusFile corpus = generate_synthetic_corpus(10, 99);
  Vocab vocab = build_vocab(corpus, 1024);
  for (std::size_t ri = 0; ri < corpus.records.size(); ++ri) {
    const MathText& mt = corpus.records[ri];
    CorruptedExample ex = shuffle_formulas(mt, vocab, Rng::mix(3, ri));
    if (ex.degenerate) continue;
    // the $ delimiters stay put, so spans of the corrupted text are
    // recoverable by re-extraction
    std::vector<std::string> corrupted = decode(ex.input, vocab);
    std::vector<FormulaSpan> spans = extract_formula_spans(corrupted);
    REQUIRE(spans.size() == mt.formulas.size());
    std::vector<std::string> rebuilt = corrupted;
    // place slot contents back at their source slots
    std::vector<std::vector<std::string>> contents;
    for (const FormulaSpan& s : spans) contents.push_back(s.symbols);
    std::vector<std::string> out;
    std::size_t next = 0, i = 0;
    while (i < corrupted.size()) {
      if (next < spans.size() && i == spans[next].start) {
        // slot `next` holds formula permutation[next]; invert by writing the
        // content whose source index equals `next`
        std::size_t source_slot = 0;
        for (std::size_t s = 0; s < ex.permutation.size(); ++s)
          if (ex.permutation[s] == next) source_slot = s;
        for (const std::string& w : contents[source_slot]) out.push_back(w);
        i = spans[next].end;
        ++next;
      } else {
        out.push_back(corrupted[i]);
        ++i;
      }
    }
    REQUIRE(out == mt.solution);
  }
}
