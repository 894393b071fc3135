#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "jz/corpus.hpp"

namespace jz {

// Reserved token ids, fixed across every build.
inline constexpr int kPad = 0;
inline constexpr int kCls = 1;
inline constexpr int kSep = 2;
inline constexpr int kMask = 3;
inline constexpr int kUnk = 4;
inline constexpr std::array<const char*, 5> kReservedTokens = {"[PAD]", "[CLS]", "[SEP]",
                                                               "[MASK]", "[UNK]"};

/// Structural tokens are never masked and carry no position weight.
/// [UNK] is ordinary content (an out-of-vocabulary word).
inline bool is_structural(int id) { return id >= kPad && id <= kMask; }

/// Word-level vocabulary: one surface word (or math symbol) per id.
class Vocab {
 public:
  static Vocab from_tokens(std::vector<std::string> tokens) {
    Vocab v;
    v.tokens_ = std::move(tokens);
    require(v.tokens_.size() >= kReservedTokens.size(), "vocab: too small");
    for (std::size_t i = 0; i < kReservedTokens.size(); ++i)
      require(v.tokens_[i] == kReservedTokens[i],
              "vocab: reserved token missing at id " + std::to_string(i));
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
      require(v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second,
              "vocab: duplicate token " + v.tokens_[i]);
    }
    return v;
  }

  std::size_t size() const { return tokens_.size(); }

  int id_of(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& word) const { return index_.count(word) > 0; }

  const std::string& token(int id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < tokens_.size(),
            "vocab: id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::string& path) const {
    std::ofstream out(path);
    require(out.good(), "vocab: cannot open " + path);
    for (const auto& t : tokens_) out << t << "\n";
  }

  static Vocab load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "vocab: cannot open " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Most-frequent surface tokens up to max_size (reserved ids included in the
/// cap); ties broken lexicographically. Deterministic.
inline Vocab build_vocab(const CorpusFile& corpus, std::size_t max_size) {
  require(!corpus.records.empty(), "build_vocab: empty corpus");
  require(max_size >= kReservedTokens.size(), "build_vocab: max_size below reserved count");
  std::map<std::string, std::size_t> freq;
  auto count = [&](const std::vector<std::string>& words) {
    for (const auto& w : words) {
      bool reserved = std::find(kReservedTokens.begin(), kReservedTokens.end(), w) !=
                      kReservedTokens.end();
      if (!reserved) ++freq[w];
    }
  };
  for (const MathText& mt : corpus.records) {
    count(mt.statement);
    count(mt.solution);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens(kReservedTokens.begin(), kReservedTokens.end());
  for (const auto& [word, n] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(word);
  }
  return Vocab::from_tokens(std::move(tokens));
}

/**
 * Integer-encoded text. `word_spans` partitions `ids` into whole words
 * (singletons for this word-level vocabulary, but the masking machinery
 * supports wider spans); `is_math` marks tokens lying inside a $...$ region.
 */
struct TokenSequence {
  std::vector<int> ids;
  std::vector<Range> word_spans;
  std::vector<char> is_math;

  std::size_t size() const { return ids.size(); }

  void push_word(int id, bool math) {
    word_spans.push_back({ids.size(), ids.size() + 1});
    ids.push_back(id);
    is_math.push_back(math);
  }

  void validate(std::size_t vocab_size) const {
    require(is_math.size() == ids.size(), "token sequence: flag length mismatch");
    std::size_t cursor = 0;
    for (const Range& r : word_spans) {
      require(r.begin == cursor && r.end > r.begin && r.end <= ids.size(),
              "token sequence: word spans do not partition ids");
      cursor = r.end;
    }
    require(cursor == ids.size(), "token sequence: word spans do not cover ids");
    for (int id : ids)
      require(id >= 0 && static_cast<std::size_t>(id) < vocab_size,
              "token sequence: id out of range");
    for (const Range& r : word_spans)
      if (r.size() > 1)
        for (std::size_t i = r.begin; i < r.end; ++i)
          require(!is_structural(ids[i]), "token sequence: structural token in multi-token word");
  }
};

/// Encode a word sequence; unknown words map to [UNK]. The $ delimiters are
/// kept as tokens but only the words strictly between them are flagged math.
inline TokenSequence encode(const std::vector<std::string>& words, const Vocab& vocab) {
  TokenSequence ts;
  bool in_math = false;
  for (const std::string& w : words) {
    if (w == "$") {
      ts.push_word(vocab.id_of(w), false);
      in_math = !in_math;
    } else {
      ts.push_word(vocab.id_of(w), in_math);
    }
  }
  return ts;
}

/// Decode ids back to words; [PAD] is dropped. Errors on out-of-range ids.
inline std::vector<std::string> decode(const std::vector<int>& ids, const Vocab& vocab) {
  std::vector<std::string> words;
  for (int id : ids) {
    if (id == kPad) continue;
    words.push_back(vocab.token(id));
  }
  return words;
}

inline std::vector<std::string> decode(const TokenSequence& ts, const Vocab& vocab) {
  return decode(ts.ids, vocab);
}

inline const std::vector<Range>& word_spans(const TokenSequence& ts) { return ts.word_spans; }

// -- sequence builders for the pre-training tasks ---------------------------

/// [CLS] statement [SEP] solution [SEP]
inline TokenSequence encode_pretrain(const MathText& mt, const Vocab& vocab) {
  TokenSequence ts;
  ts.push_word(kCls, false);
  TokenSequence stmt = encode(mt.statement, vocab);
  for (std::size_t i = 0; i < stmt.size(); ++i) ts.push_word(stmt.ids[i], stmt.is_math[i]);
  ts.push_word(kSep, false);
  TokenSequence sol = encode(mt.solution, vocab);
  for (std::size_t i = 0; i < sol.size(); ++i) ts.push_word(sol.ids[i], sol.is_math[i]);
  ts.push_word(kSep, false);
  return ts;
}

/// [CLS] words [SEP]
inline TokenSequence encode_wrapped(const std::vector<std::string>& words, const Vocab& vocab) {
  TokenSequence ts;
  ts.push_word(kCls, false);
  TokenSequence body = encode(words, vocab);
  for (std::size_t i = 0; i < body.size(); ++i) ts.push_word(body.ids[i], body.is_math[i]);
  ts.push_word(kSep, false);
  return ts;
}

}  // namespace jz
