#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cstdio>
#include <filesystem>

#include "jz/vocab.hpp"

using namespace jz;

namespace {

CorpusFile tiny_corpus(const std::string& statement, const std::string& solution) {
  CorpusFile c;
  MathText mt;
  mt.id = "t";
  mt.statement = split_words(statement);
  mt.solution = split_words(solution);
  annotate(mt);
  c.records.push_back(std::move(mt));
  return c;
}

}  // namespace

TEST_CASE("build_vocab counts reserved plus distinct words") {
  CorpusFile c = tiny_corpus("alpha beta", "gamma alpha");
  Vocab v = build_vocab(c, 100);
  REQUIRE(v.size() == 8);  // 5 reserved + {alpha, beta, gamma}
  // alpha occurs twice, so it takes the first regular id
  REQUIRE(v.id_of("alpha") == 5);
}

TEST_CASE("equal frequencies break ties lexicographically") {
  CorpusFile c = tiny_corpus("zebra apple", "zebra apple");
  Vocab v = build_vocab(c, 100);
  REQUIRE(v.id_of("apple") < v.id_of("zebra"));
}

TEST_CASE("vocab build is deterministic") {
  CorpusFile c = generate_synthetic_corpus(12, 5);
  Vocab a = build_vocab(c, 300);
  Vocab b = build_vocab(c, 300);
  REQUIRE(a.tokens() == b.tokens());
}

TEST_CASE("max_size caps the vocabulary") {
  CorpusFile c = generate_synthetic_corpus(12, 5);
  Vocab v = build_vocab(c, 10);
  REQUIRE(v.size() == 10);
}

TEST_CASE("reserved ids are stable") {
  CorpusFile c = tiny_corpus("a", "b");
  Vocab v = build_vocab(c, 100);
  REQUIRE(v.token(kPad) == "[PAD]");
  REQUIRE(v.token(kCls) == "[CLS]");
  REQUIRE(v.token(kSep) == "[SEP]");
  REQUIRE(v.token(kMask) == "[MASK]");
  REQUIRE(v.token(kUnk) == "[UNK]");
}

TEST_CASE("encode maps words to singleton spans") {
  Vocab v = build_vocab(tiny_corpus("one two three", "x ."), 100);
  TokenSequence ts = encode({"one", "two", "three"}, v);
  REQUIRE(ts.ids.size() == 3);
  REQUIRE(ts.word_spans.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) REQUIRE(ts.word_spans[i] == Range{i, i + 1});
  REQUIRE_NOTHROW(ts.validate(v.size()));
}

TEST_CASE("out-of-vocabulary words become [UNK]") {
  Vocab v = build_vocab(tiny_corpus("known", "x ."), 100);
  TokenSequence ts = encode({"known", "unknown"}, v);
  REQUIRE(ts.ids[0] == v.id_of("known"));
  REQUIRE(ts.ids[1] == kUnk);
}

TEST_CASE("is_math flags formula interiors only") {
  Vocab v = build_vocab(tiny_corpus("a $ x $ b", "x ."), 100);
  TokenSequence ts = encode({"a", "$", "x", "$", "b"}, v);
  REQUIRE(ts.is_math == std::vector<char>{0, 0, 1, 0, 0});
}

TEST_CASE("decode round trip and PAD dropping") {
  Vocab v = build_vocab(tiny_corpus("alpha beta gamma", "x ."), 100);
  std::vector<std::string> words = {"alpha", "gamma", "beta"};
  REQUIRE(decode(encode(words, v), v) == words);
  REQUIRE(decode(std::vector<int>{kPad, kPad}, v).empty());
}

TEST_CASE("decode rejects out-of-range ids") {
  Vocab v = build_vocab(tiny_corpus("a", "b"), 100);
  REQUIRE_THROWS_AS(decode(std::vector<int>{static_cast<int>(v.size())}, v), Error);
}

TEST_CASE("word_spans accessor returns the stored partition") {
  Vocab v = build_vocab(tiny_corpus("a b", "c ."), 100);
  TokenSequence ts = encode({"a", "b", "c"}, v);
  REQUIRE(word_spans(ts).size() == 3);
  REQUIRE(word_spans(ts) == ts.word_spans);
}

TEST_CASE("vocab file round trip preserves ids") {
  Vocab v = build_vocab(generate_synthetic_corpus(8, 2), 200);
  auto path = (std::filesystem::temp_directory_path() /
               ("jz_vocab_" + std::to_string(::getpid()) + ".txt"))
                  .string();
  v.save(path);
  Vocab loaded = Vocab::load(path);
  std::remove(path.c_str());
  REQUIRE(loaded.tokens() == v.tokens());
}

TEST_CASE("vocab validation rejects duplicates and missing reserved tokens") {
  REQUIRE_THROWS_AS(Vocab::from_tokens({"[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]", "a", "a"}),
                    Error);
  REQUIRE_THROWS_AS(Vocab::from_tokens({"[PAD]", "[CLS]", "[SEP]", "[MASK]", "x"}), Error);
  REQUIRE_THROWS_AS(Vocab::from_tokens({"[PAD]"}), Error);
}

TEST_CASE("encode_pretrain frames statement and solution") {
  CorpusFile c = generate_synthetic_corpus(1, 4);
  Vocab v = build_vocab(c, 300);
  const MathText& mt = c.records[0];
  TokenSequence ts = encode_pretrain(mt, v);
  REQUIRE(ts.ids.front() == kCls);
  REQUIRE(ts.ids.back() == kSep);
  REQUIRE(ts.ids[mt.statement.size() + 1] == kSep);
  REQUIRE(ts.size() == mt.statement.size() + mt.solution.size() + 3);
  REQUIRE_NOTHROW(ts.validate(v.size()));
}
