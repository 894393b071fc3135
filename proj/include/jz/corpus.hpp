#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jz/common.hpp"
#include "jz/rng.hpp"

namespace jz {

/// Maximal `$ ... $` region of a solution, delimiters excluded.
struct FormulaSpan {
  std::size_t start = 0;  // word index, inclusive
  std::size_t end = 0;    // word index, exclusive
  std::vector<std::string> symbols;
  bool operator==(const FormulaSpan& o) const { return start == o.start && end == o.end; }
};

/**
 * One problem: a word-segmented statement and solution, plus the structural
 * annotation of the solution (sentence ranges and formula spans) that the
 * shuffling corruptions operate on.
 */
struct MathText {
  std::string id;
  std::vector<std::string> statement;
  std::vector<std::string> solution;
  std::vector<Range> sentences;       // partition of the solution
  std::vector<FormulaSpan> formulas;  // inside the solution
};

struct CorpusFile {
  std::string path;
  std::vector<MathText> records;
};

inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

namespace detail {

inline bool is_math_operator_char(char c) {
  static const std::string ops = "+-*/=<>(){}[]^_,.!?:;|%~";
  return ops.find(c) != std::string::npos;
}

/// Split one whitespace-free chunk of formula text into symbol tokens:
/// backslash commands and alphanumeric runs stay whole, operator characters
/// stand alone, and ** becomes ^.
inline void split_math_chunk(const std::string& chunk, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < chunk.size()) {
    char c = chunk[i];
    if (c == '*' && i + 1 < chunk.size() && chunk[i + 1] == '*') {
      out.push_back("^");
      i += 2;
    } else if (c == '\\') {
      std::size_t j = i;
      while (j < chunk.size() && chunk[j] == '\\') ++j;
      while (j < chunk.size() && (std::isalpha(static_cast<unsigned char>(chunk[j])))) ++j;
      out.push_back(chunk.substr(i, j - i));
      i = j;
    } else if (is_math_operator_char(c)) {
      out.push_back(std::string(1, c));
      ++i;
    } else {
      // alnum run; multi-byte UTF-8 sequences pass through untouched
      std::size_t j = i;
      while (j < chunk.size() && chunk[j] != '\\' && chunk[j] != '$' &&
             !is_math_operator_char(chunk[j]) && !(chunk[j] == '*'))
        ++j;
      if (j == i) ++i;  // lone '$' handled by caller; never reached otherwise
      else {
        out.push_back(chunk.substr(i, j - i));
        i = j;
      }
    }
  }
}

/// x ^ y  ->  x ^ { y }  (already-braced exponents left alone).
inline std::vector<std::string> canonicalize_exponents(const std::vector<std::string>& toks) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    out.push_back(toks[i]);
    if (toks[i] == "^" && i + 1 < toks.size() && toks[i + 1] != "{") {
      out.push_back("{");
      out.push_back(toks[i + 1]);
      out.push_back("}");
      ++i;
    }
  }
  return out;
}

}  // namespace detail

/**
 * Canonicalize already-extracted mathematical text: non-printing characters
 * removed, whitespace runs collapsed, every operator/symbol inside a $...$
 * region made a standalone token, and exponents unified to the `x ^ { y }`
 * form (both `x**y` and `x^y` map to it). Idempotent.
 */
inline std::string normalize_math_text(const std::string& raw) {
  // Strip non-printing characters, mapping whitespace variants to ' '.
  std::string clean;
  clean.reserve(raw.size());
  for (char c : raw) {
    unsigned char u = static_cast<unsigned char>(c);
    if (c == '\t' || c == '\n' || c == '\r')
      clean += ' ';
    else if (u >= 0x20 && u != 0x7f)
      clean += c;
    else if (u >= 0x80)
      clean += c;
  }

  // Balance check with the offset of the offending delimiter.
  long open_at = -1;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i] == '$') open_at = open_at < 0 ? static_cast<long>(i) : -1;
  }
  if (open_at >= 0)
    fail("normalize_math_text: unbalanced $ delimiter at offset " + std::to_string(open_at));

  std::vector<std::string> out_tokens;
  std::size_t pos = 0;
  while (pos < clean.size()) {
    std::size_t dollar = clean.find('$', pos);
    std::string prose = clean.substr(pos, dollar == std::string::npos ? std::string::npos
                                                                      : dollar - pos);
    for (const auto& w : split_words(prose)) out_tokens.push_back(w);
    if (dollar == std::string::npos) break;
    std::size_t close = clean.find('$', dollar + 1);
    out_tokens.push_back("$");
    std::vector<std::string> math;
    for (const auto& chunk : split_words(clean.substr(dollar + 1, close - dollar - 1)))
      detail::split_math_chunk(chunk, math);
    for (const auto& t : detail::canonicalize_exponents(math)) out_tokens.push_back(t);
    out_tokens.push_back("$");
    pos = close + 1;
  }
  return join_words(out_tokens);
}

/**
 * Sentence ranges of a word sequence. A sentence ends at a terminator token
 * (。！？ . ! ?) or at end of sequence; terminators inside $...$ regions do
 * not split. A sequence with no terminator is one sentence.
 */
inline std::vector<Range> split_sentences(const std::vector<std::string>& words) {
  require(!words.empty(), "split_sentences: empty word sequence");
  static const std::set<std::string> kTerminators = {"。", "！", "？", ".", "!", "?"};
  std::vector<Range> ranges;
  std::size_t begin = 0;
  bool in_math = false;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == "$") {
      in_math = !in_math;
      continue;
    }
    if (!in_math && kTerminators.count(words[i])) {
      ranges.push_back({begin, i + 1});
      begin = i + 1;
    }
  }
  if (begin < words.size()) ranges.push_back({begin, words.size()});
  return ranges;
}

/// Formula spans: one per maximal $...$ region, delimiters excluded.
/// Empty regions ($ $) produce no span.
inline std::vector<FormulaSpan> extract_formula_spans(const std::vector<std::string>& words) {
  std::vector<FormulaSpan> spans;
  long open = -1;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] != "$") continue;
    if (open < 0) {
      open = static_cast<long>(i);
    } else {
      std::size_t start = static_cast<std::size_t>(open) + 1;
      if (i > start) {
        FormulaSpan s{start, i, {}};
        s.symbols.assign(words.begin() + start, words.begin() + i);
        spans.push_back(std::move(s));
      }
      open = -1;
    }
  }
  if (open >= 0)
    fail("extract_formula_spans: unbalanced $ delimiter at word " + std::to_string(open));
  return spans;
}

inline void annotate(MathText& mt) {
  mt.sentences = split_sentences(mt.solution);
  mt.formulas = extract_formula_spans(mt.solution);
}

inline void validate_math_text(const MathText& mt) {
  require(!mt.statement.empty(), "record " + mt.id + ": empty statement");
  require(!mt.solution.empty(), "record " + mt.id + ": empty solution");
  require(!mt.sentences.empty(), "record " + mt.id + ": no sentence ranges");
  std::size_t cursor = 0;
  for (const Range& r : mt.sentences) {
    require(r.begin == cursor && r.end > r.begin, "record " + mt.id + ": sentence ranges do not partition the solution");
    cursor = r.end;
  }
  require(cursor == mt.solution.size(), "record " + mt.id + ": sentence ranges do not cover the solution");
  std::size_t prev_end = 0;
  for (const FormulaSpan& f : mt.formulas) {
    require(f.end > f.start && f.end <= mt.solution.size() && f.start >= prev_end,
            "record " + mt.id + ": bad formula span");
    prev_end = f.end;
    bool inside_one = false;
    for (const Range& r : mt.sentences)
      if (f.start >= r.begin && f.end <= r.end) inside_one = true;
    require(inside_one, "record " + mt.id + ": formula span crosses a sentence boundary");
    for (std::size_t i = f.start; i < f.end; ++i)
      require(mt.solution[i] != "$", "record " + mt.id + ": formula span contains a delimiter");
  }
}

// ---------------------------------------------------------------------------
// JSON-Lines persistence. One record per line; `sentences` and `formulas`
// are always written so a loaded file re-saves byte-identically.
// ---------------------------------------------------------------------------

inline nlohmann::json record_to_json(const MathText& mt) {
  nlohmann::json j;
  j["id"] = mt.id;
  j["statement"] = join_words(mt.statement);
  j["solution"] = join_words(mt.solution);
  auto& sent = j["sentences"] = nlohmann::json::array();
  for (const Range& r : mt.sentences) sent.push_back({r.begin, r.end});
  auto& forms = j["formulas"] = nlohmann::json::array();
  for (const FormulaSpan& f : mt.formulas) forms.push_back({f.start, f.end});
  return j;
}

inline MathText record_from_json(const nlohmann::json& j) {
  MathText mt;
  mt.id = j.at("id").get<std::string>();
  mt.statement = split_words(j.at("statement").get<std::string>());
  mt.solution = split_words(j.at("solution").get<std::string>());
  if (j.contains("sentences") && j.contains("formulas")) {
    for (const auto& p : j.at("sentences"))
      mt.sentences.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
    for (const auto& p : j.at("formulas")) {
      FormulaSpan f{p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>(), {}};
      if (f.end <= mt.solution.size())
        f.symbols.assign(mt.solution.begin() + f.start, mt.solution.begin() + f.end);
      mt.formulas.push_back(std::move(f));
    }
  } else {
    annotate(mt);
  }
  return mt;
}

inline CorpusFile load_corpus(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_corpus: cannot open " + path);
  CorpusFile corpus;
  corpus.path = path;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    MathText mt;
    try {
      mt = record_from_json(nlohmann::json::parse(line));
      validate_math_text(mt);
    } catch (const nlohmann::json::exception& e) {
      fail("load_corpus: " + path + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      fail("load_corpus: " + path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    require(seen.insert(mt.id).second,
            "load_corpus: " + path + " line " + std::to_string(lineno) + ": duplicate id " + mt.id);
    corpus.records.push_back(std::move(mt));
  }
  return corpus;
}

inline void save_corpus(const CorpusFile& corpus, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "save_corpus: cannot open " + path);
  for (const MathText& mt : corpus.records) out << record_to_json(mt).dump() << "\n";
}

// ---------------------------------------------------------------------------
// Synthetic corpus: templated arithmetic and linear-equation problems with
// step-by-step solutions. Stands in for a real corpus at desk scale.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string num(long v) { return std::to_string(v); }

struct SynthProblem {
  std::string statement;
  std::string solution;
  long answer = 0;
  std::size_t kind = 0;
};

inline SynthProblem synth_template(std::size_t kind, Rng& rng) {
  auto pick = [&](long lo, long hi) { return lo + static_cast<long>(rng.uniform_int(static_cast<std::size_t>(hi - lo + 1))); };
  SynthProblem p;
  p.kind = kind % 4;
  switch (kind % 4) {
    case 0: {
      long a = pick(2, 9), x = pick(2, 12), b = pick(1, 19), c = a * x + b;
      p.statement = "solve for $ x $ : $ " + num(a) + " x + " + num(b) + " = " + num(c) + " $ .";
      p.solution = "subtract $ " + num(b) + " $ from both sides to get $ " + num(a) + " x = " +
                   num(c - b) + " $ . divide both sides by $ " + num(a) + " $ to get $ x = " +
                   num(x) + " $ . the answer is $ " + num(x) + " $ .";
      p.answer = x;
      break;
    }
    case 1: {
      long a = pick(3, 20), b = pick(2, 15);
      p.statement = "tom has $ " + num(a) + " $ apples and buys $ " + num(b) +
                    " $ more . how many apples does tom have ?";
      p.solution = "tom starts with $ " + num(a) + " $ apples . buying more adds $ " + num(b) +
                   " $ , so $ " + num(a) + " + " + num(b) + " = " + num(a + b) +
                   " $ . the answer is $ " + num(a + b) + " $ .";
      p.answer = a + b;
      break;
    }
    case 2: {
      long w = pick(2, 12), h = pick(2, 12);
      p.statement = "a rectangle has width $ " + num(w) + " $ and height $ " + num(h) +
                    " $ . find its area .";
      p.solution = "the area of a rectangle is width times height . multiply to get $ " + num(w) +
                   " * " + num(h) + " = " + num(w * h) + " $ . the answer is $ " + num(w * h) +
                   " $ .";
      p.answer = w * h;
      break;
    }
    default: {
      long a = pick(2, 10), m = pick(2, 6), b = pick(1, 9), prod = a * m;
      p.statement = "start with $ " + num(a) + " $ , multiply by $ " + num(m) +
                    " $ , then subtract $ " + num(b) + " $ . what remains ?";
      p.solution = "multiplying gives $ " + num(a) + " * " + num(m) + " = " + num(prod) +
                   " $ . subtracting gives $ " + num(prod) + " - " + num(b) + " = " +
                   num(prod - b) + " $ . the answer is $ " + num(prod - b) + " $ .";
      p.answer = prod - b;
      break;
    }
  }
  return p;
}

}  // namespace detail

/// Deterministic synthetic corpus; every record has a multi-sentence,
/// multi-formula solution ending in an answer sentence.
inline CorpusFile generate_synthetic_corpus(std::size_t count, std::uint64_t seed) {
  require(count >= 1, "generate_synthetic_corpus: count must be >= 1");
  CorpusFile corpus;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(Rng::mix(seed, i));
    auto prob = detail::synth_template(rng.uniform_int(4), rng);
    MathText mt;
    mt.id = "synth-" + std::to_string(i);
    mt.statement = split_words(normalize_math_text(prob.statement));
    mt.solution = split_words(normalize_math_text(prob.solution));
    annotate(mt);
    validate_math_text(mt);
    corpus.records.push_back(std::move(mt));
  }
  return corpus;
}

}  // namespace jz
