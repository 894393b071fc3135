#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "jz/common.hpp"

namespace jz {

/// Exact-match fraction.
template <typename T>
real accuracy(const std::vector<T>& preds, const std::vector<T>& golds) {
  require(preds.size() == golds.size() && !preds.empty(), "accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == golds[i];
  return real(hits) / real(preds.size());
}

/// Unweighted mean of per-label F1 over all `num_labels` labels. A label
/// absent from both predictions and golds contributes F1 = 0.
inline real f1_macro(const std::vector<int>& preds, const std::vector<int>& golds,
                     std::size_t num_labels) {
  require(preds.size() == golds.size() && !preds.empty(), "f1_macro: size mismatch");
  require(num_labels >= 1, "f1_macro: need at least one label");
  real sum = 0;
  for (std::size_t label = 0; label < num_labels; ++label) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      bool p = preds[i] == static_cast<int>(label);
      bool g = golds[i] == static_cast<int>(label);
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    real prec = tp + fp == 0 ? real(0) : real(tp) / real(tp + fp);
    real rec = tp + fn == 0 ? real(0) : real(tp) / real(tp + fn);
    sum += prec + rec == 0 ? real(0) : 2 * prec * rec / (prec + rec);
  }
  return sum / real(num_labels);
}

/// 1 if any relevant item appears in the top k of the ranked relevance list.
inline real hit_ratio_at_k(const std::vector<real>& ranked_relevance, std::size_t k = 3) {
  for (std::size_t i = 0; i < std::min(k, ranked_relevance.size()); ++i)
    if (ranked_relevance[i] > 0) return 1;
  return 0;
}

/// NDCG with gain rel_i / log2(i+1), ranks starting at 1; 0 when no item is
/// relevant.
inline real ndcg_at_k(const std::vector<real>& ranked_relevance, std::size_t k = 3) {
  auto dcg = [&](const std::vector<real>& rel) {
    real s = 0;
    for (std::size_t i = 0; i < std::min(k, rel.size()); ++i)
      s += rel[i] / real(std::log2(double(i) + 2.0));
    return s;
  };
  std::vector<real> ideal = ranked_relevance;
  std::sort(ideal.begin(), ideal.end(), std::greater<real>());
  real idcg = dcg(ideal);
  return idcg <= 0 ? real(0) : dcg(ranked_relevance) / idcg;
}

namespace detail {

inline std::map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& words,
                                                       std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (words.size() < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string key;
    for (std::size_t j = 0; j < n; ++j) {
      key += words[i + j];
      key += '\x1f';
    }
    ++counts[key];
  }
  return counts;
}

inline std::size_t clipped_matches(const std::map<std::string, std::size_t>& cand,
                                   const std::map<std::string, std::size_t>& ref) {
  std::size_t m = 0;
  for (const auto& [key, c] : cand) {
    auto it = ref.find(key);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

}  // namespace detail

/**
 * BLEU-4: geometric mean of modified 1..4-gram precisions with brevity
 * penalty. Smoothing convention: for n >= 2, an order with zero matches
 * scores (0+1)/(count+1) — without it any text shorter than four tokens
 * would score zero. A zero unigram match (or empty candidate) gives 0.
 */
inline real bleu4(const std::vector<std::string>& candidate,
                  const std::vector<std::string>& reference) {
  if (candidate.empty()) return 0;
  real log_sum = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto cc = detail::ngram_counts(candidate, n);
    auto rc = detail::ngram_counts(reference, n);
    std::size_t total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
    std::size_t matched = detail::clipped_matches(cc, rc);
    real p;
    if (n == 1) {
      if (matched == 0) return 0;
      p = real(matched) / real(total);
    } else if (matched == 0) {
      p = real(1) / real(total + 1);
    } else {
      p = real(matched) / real(total);
    }
    log_sum += std::log(p);
  }
  real bp = candidate.size() >= reference.size()
                ? real(1)
                : std::exp(real(1) - real(reference.size()) / real(candidate.size()));
  return bp * std::exp(log_sum / 4);
}

/// ROUGE-N: F1 of clipped n-gram overlap.
inline real rouge_n(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference, std::size_t n = 2) {
  auto cc = detail::ngram_counts(candidate, n);
  auto rc = detail::ngram_counts(reference, n);
  std::size_t c_total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
  std::size_t r_total = reference.size() >= n ? reference.size() - n + 1 : 0;
  if (c_total == 0 || r_total == 0) return 0;
  std::size_t m = detail::clipped_matches(cc, rc);
  real p = real(m) / real(c_total);
  real r = real(m) / real(r_total);
  return p + r == 0 ? real(0) : 2 * p * r / (p + r);
}

/// ROUGE-L: F1 based on the longest common subsequence.
inline real rouge_l(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) return 0;
  const std::size_t a = candidate.size(), b = reference.size();
  std::vector<std::size_t> prev(b + 1, 0), cur(b + 1, 0);
  for (std::size_t i = 1; i <= a; ++i) {
    for (std::size_t j = 1; j <= b; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  std::size_t lcs = prev[b];
  if (lcs == 0) return 0;
  real p = real(lcs) / real(a);
  real r = real(lcs) / real(b);
  return 2 * p * r / (p + r);
}

/// Final numeric expression of a text: the last integer, decimal or simple
/// fraction a/b. Returns nothing if no number occurs.
inline std::optional<double> parse_final_number(const std::string& text) {
  static const std::regex pat(
      R"(([-+]?[0-9]+(?:\.[0-9]+)?)(?:\s*/\s*([-+]?[0-9]+(?:\.[0-9]+)?))?)");
  std::optional<double> result;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), pat);
       it != std::sregex_iterator(); ++it) {
    double a = std::stod((*it)[1].str());
    if ((*it)[2].matched) {
      double b = std::stod((*it)[2].str());
      if (b == 0) continue;
      result = a / b;
    } else {
      result = a;
    }
  }
  return result;
}

/// Numeric answer matching: compare the final numeric expressions within
/// 1e-9 (relative for large magnitudes); texts without a parseable number
/// fall back to exact string equality.
inline bool numeric_match(const std::string& generated, const std::string& gold) {
  auto a = parse_final_number(generated);
  auto b = parse_final_number(gold);
  if (a && b) {
    double tol = 1e-9 * std::max({1.0, std::abs(*a), std::abs(*b)});
    return std::abs(*a - *b) <= tol;
  }
  return generated == gold;
}

}  // namespace jz
