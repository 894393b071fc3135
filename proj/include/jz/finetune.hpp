#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "jz/curriculum.hpp"
#include "jz/metrics.hpp"

namespace jz {

enum class HeadKind { Classify, RankCross, RankDual, Generate };

/// Downstream task shape: which head solves it and which metrics score it.
struct TaskSpec {
  std::string name;
  HeadKind head = HeadKind::Classify;
  std::size_t num_labels = 0;
  std::vector<std::string> metrics;
  bool multilabel = false;  // KPC sigmoid-head variant

  bool is_understanding() const { return head != HeadKind::Generate; }
};

struct TaskFlags {
  bool kpc_multilabel = false;
  bool mcq_classify = false;
};

inline TaskSpec task_spec(const std::string& name, std::size_t num_labels = 0,
                          const TaskFlags& flags = {}) {
  TaskSpec s;
  s.name = name;
  if (name == "KPC") {
    s.head = HeadKind::Classify;
    s.num_labels = num_labels ? num_labels : 4;
    s.metrics = {"accuracy", "f1_macro"};
    s.multilabel = flags.kpc_multilabel;
  } else if (name == "QRC") {
    s.head = HeadKind::Classify;
    s.num_labels = 6;
    s.metrics = {"accuracy", "f1_macro"};
  } else if (name == "QAM") {
    s.head = HeadKind::Classify;
    s.num_labels = 2;
    s.metrics = {"accuracy", "f1_macro"};
  } else if (name == "SQR") {
    s.head = HeadKind::RankCross;
    s.metrics = {"hr3", "ndcg3"};
  } else if (name == "QAR") {
    s.head = HeadKind::RankDual;
    s.metrics = {"hr3", "ndcg3"};
  } else if (name == "MCQ") {
    s.head = flags.mcq_classify ? HeadKind::Classify : HeadKind::Generate;
    s.num_labels = 4;
    s.metrics = {"accuracy"};
  } else if (name == "BFQ") {
    s.head = HeadKind::Generate;
    s.metrics = {"accuracy"};
  } else if (name == "CAG" || name == "BAG") {
    s.head = HeadKind::Generate;
    s.metrics = {"bleu4", "rouge2", "rougeL", "accuracy"};
  } else {
    fail("task_spec: unknown task " + name);
  }
  return s;
}

struct TaskExample {
  std::string text_a;                   // question / q1 / query
  std::string text_b;                   // q2 / answer for pair tasks
  int label = -1;                       // single-label classification
  std::vector<int> labels;              // multilabel variant
  std::vector<std::string> candidates;  // ranking pools
  std::vector<int> relevant;            // indices into candidates
  std::string target_text;              // generation target
  std::string answer;                   // gold answer (choice letter / number)
};

struct TaskData {
  TaskSpec spec;
  std::vector<TaskExample> examples;
};

// -- model inputs -------------------------------------------------------------

namespace detail {

inline std::uint64_t fnv_name(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Proportional right-truncation: each segment keeps a prefix sized by its
/// share of the budget.
inline void truncate_segments(std::vector<std::vector<std::string>>& segments,
                              std::size_t budget) {
  std::size_t total = 0;
  for (const auto& s : segments) total += s.size();
  if (total <= budget) return;
  std::vector<std::size_t> keep(segments.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    keep[i] = budget * segments[i].size() / total;
    assigned += keep[i];
  }
  for (std::size_t i = 0; assigned < budget; i = (i + 1) % segments.size()) {
    if (keep[i] < segments[i].size()) {
      ++keep[i];
      ++assigned;
    }
  }
  for (std::size_t i = 0; i < segments.size(); ++i) segments[i].resize(keep[i]);
}

inline TokenSequence sequence_from_segments(std::vector<std::vector<std::string>> segments,
                                            const Vocab& vocab, std::size_t max_len) {
  require(max_len >= 2 + segments.size(), "build_task_input: max_len too small");
  truncate_segments(segments, max_len - 1 - segments.size());
  TokenSequence ts;
  ts.push_word(kCls, false);
  for (const auto& seg : segments) {
    TokenSequence body = encode(seg, vocab);
    for (std::size_t i = 0; i < body.size(); ++i) ts.push_word(body.ids[i], body.is_math[i]);
    ts.push_word(kSep, false);
  }
  return ts;
}

}  // namespace detail

/**
 * Model inputs per task: pair tasks get [CLS] a [SEP] b [SEP], the dual
 * retrieval task gets two independent [CLS] x [SEP] sequences, everything
 * else gets [CLS] q [SEP]. Overlong inputs are truncated to max_len, each
 * segment proportionally from the right.
 */
inline std::vector<TokenSequence> build_task_input(const TaskSpec& spec, const std::string& text_a,
                                                   const std::string& text_b, const Vocab& vocab,
                                                   std::size_t max_len) {
  std::vector<std::string> a = split_words(text_a);
  std::vector<std::string> b = split_words(text_b);
  require(!a.empty(), "build_task_input: empty text");
  bool pair = spec.name == "QRC" || spec.name == "SQR" || spec.name == "QAM";
  if (pair) {
    require(!b.empty(), "build_task_input: empty second text for pair task " + spec.name);
    return {detail::sequence_from_segments({a, b}, vocab, max_len)};
  }
  if (spec.head == HeadKind::RankDual) {
    require(!b.empty(), "build_task_input: empty second text for dual task " + spec.name);
    return {detail::sequence_from_segments({a}, vocab, max_len),
            detail::sequence_from_segments({b}, vocab, max_len)};
  }
  return {detail::sequence_from_segments({a}, vocab, max_len)};
}

// -- task heads ---------------------------------------------------------------

/// Adds the task's head parameters to the model if not present yet.
inline void ensure_task_head(ModelParams& params, const TaskSpec& spec, std::uint64_t seed) {
  auto add_normal = [&](const std::string& name, std::vector<std::size_t> shape) {
    if (params.tensors.count(name)) return;
    Tensor t(shape);
    Rng rng(Rng::mix(seed, detail::fnv_name(name)));
    for (auto& v : t.data) v = real(rng.truncated_normal(0.02));
    params.tensors.emplace(name, std::move(t));
  };
  auto add_zero = [&](const std::string& name, std::vector<std::size_t> shape) {
    params.tensors.try_emplace(name, Tensor(shape));
  };
  switch (spec.head) {
    case HeadKind::Classify:
      add_normal("head.cls.w", {params.config.dim, spec.num_labels});
      add_zero("head.cls.b", {spec.num_labels});
      break;
    case HeadKind::RankCross:
      add_normal("head.rank.w", {params.config.dim, 1});
      add_zero("head.rank.b", {1});
      break;
    case HeadKind::RankDual:
    case HeadKind::Generate:
      break;
  }
}

/// Linear head logits over the pooled [CLS] state, 1 x num_labels.
inline NodeId classify_logits_node(ModelGraph& g, const std::vector<int>& ids) {
  Tape& t = g.tape();
  NodeId pooled = g.pooled_cls(g.u_states(g.encode_ids(ids)), ids);
  return t.add_row(t.matmul(pooled, t.param("head.cls.w", g.params().at("head.cls.w"))),
                   t.param("head.cls.b", g.params().at("head.cls.b")));
}

inline NodeId classify_loss_node(ModelGraph& g, const std::vector<int>& ids, int label) {
  NodeId logits = classify_logits_node(g, ids);
  return g.tape().cross_entropy(logits, {label}, {1});
}

/// Sigmoid multi-label loss: mean binary cross-entropy over labels.
inline NodeId multilabel_loss_node(ModelGraph& g, const std::vector<int>& ids,
                                   const std::vector<int>& labels, std::size_t num_labels) {
  NodeId logits = classify_logits_node(g, ids);
  Tape& t = g.tape();
  std::vector<NodeId> parts;
  for (std::size_t l = 0; l < num_labels; ++l) {
    bool positive = std::find(labels.begin(), labels.end(), static_cast<int>(l)) != labels.end();
    parts.push_back(t.logistic_loss(t.slice_cols(logits, l, 1), positive ? real(1) : real(0)));
  }
  return t.sum_scaled(parts, std::vector<real>(parts.size(), real(1) / real(parts.size())));
}

/// Cross-encoder ranking score (scalar head on the pooled pair input).
inline NodeId rank_score_node(ModelGraph& g, const std::vector<int>& pair_ids) {
  Tape& t = g.tape();
  NodeId pooled = g.pooled_cls(g.u_states(g.encode_ids(pair_ids)), pair_ids);
  return t.add_row(t.matmul(pooled, t.param("head.rank.w", g.params().at("head.rank.w"))),
                   t.param("head.rank.b", g.params().at("head.rank.b")));
}

/// Softmax label distribution for one input.
inline std::vector<real> classify(const ModelParams& params, const std::vector<int>& ids) {
  Tape tape;
  ModelGraph g(tape, params);
  Tensor logits = tape.value(classify_logits_node(g, ids));
  real m = logits.data[0];
  for (real v : logits.data) m = std::max(m, v);
  real sum = 0;
  std::vector<real> probs(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits.data[i] - m);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
  return probs;
}

inline real dual_score(const ModelParams& params, const std::vector<int>& q_ids,
                       const std::vector<int>& c_ids) {
  Tensor q = pooled_cls(params, q_ids);
  Tensor c = pooled_cls(params, c_ids);
  real s = 0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q.data[i] * c.data[i];
  return s;
}

struct RankedCandidate {
  std::size_t index = 0;
  real score = 0;
};

/// Scores every candidate against the query and sorts descending (stable;
/// ties keep input order).
inline std::vector<RankedCandidate> rank_candidates(const ModelParams& params, const Vocab& vocab,
                                                    const TaskSpec& spec, const std::string& query,
                                                    const std::vector<std::string>& candidates) {
  require(!candidates.empty(), "rank_candidates: empty candidate list");
  std::vector<RankedCandidate> ranked;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    real score;
    if (spec.head == HeadKind::RankCross) {
      auto inputs = build_task_input(spec, query, candidates[i], vocab, params.config.max_len);
      Tape tape;
      ModelGraph g(tape, params);
      score = tape.value(rank_score_node(g, inputs[0].ids)).data[0];
    } else {
      auto inputs = build_task_input(spec, query, candidates[i], vocab, params.config.max_len);
      score = dual_score(params, inputs[0].ids, inputs[1].ids);
    }
    ranked.push_back({i, score});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) { return a.score > b.score; });
  return ranked;
}

/// First A-D token after the final answer marker; with no marker, the first
/// standalone A-D token anywhere. Empty string when nothing matches.
inline std::string extract_choice(const std::vector<std::string>& words) {
  static const std::vector<std::string> markers = {"故选", "choose"};
  auto is_choice = [](const std::string& w) {
    if (w.empty() || w[0] < 'A' || w[0] > 'D') return false;
    return w.size() == 1 || (w.size() == 2 && (w[1] == '.' || w[1] == ','));
  };
  long last_marker = -1;
  for (std::size_t i = 0; i < words.size(); ++i)
    if (std::find(markers.begin(), markers.end(), words[i]) != markers.end())
      last_marker = static_cast<long>(i);
  std::size_t from = last_marker >= 0 ? static_cast<std::size_t>(last_marker) + 1 : 0;
  for (std::size_t i = from; i < words.size(); ++i)
    if (is_choice(words[i])) return words[i].substr(0, 1);
  return "";
}

/**
 * Greedy task generation, capped at `max_out` tokens (default 128). MCQ
 * returns the extracted choice letter; the other generation tasks return
 * the full generated text.
 */
inline std::string generate_answer(const ModelParams& params, const Vocab& vocab,
                                   const TaskSpec& spec, const std::vector<int>& input_ids,
                                   std::size_t max_out = 128) {
  std::vector<int> out_ids = generate_greedy(params, input_ids, max_out);
  std::vector<std::string> words = decode(out_ids, vocab);
  if (spec.name == "MCQ") return extract_choice(words);
  return join_words(words);
}

// -- datasets -----------------------------------------------------------------

inline TaskData load_task_data(const TaskSpec& base_spec, const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_task_data: cannot open " + path);
  TaskData data;
  data.spec = base_spec;
  std::string line;
  std::size_t lineno = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("load_task_data: " + path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    TaskExample ex;
    const std::string& task = base_spec.name;
    try {
      if (task == "QRC") {
        ex.text_a = j.at("q1").get<std::string>();
        ex.text_b = j.at("q2").get<std::string>();
        ex.label = j.at("label").get<int>();
      } else if (task == "QAM") {
        ex.text_a = j.at("question").get<std::string>();
        ex.text_b = j.at("answer").get<std::string>();
        ex.label = j.at("label").get<int>();
      } else if (task == "KPC") {
        ex.text_a = j.at("question").get<std::string>();
        if (j.contains("labels"))
          ex.labels = j.at("labels").get<std::vector<int>>();
        else
          ex.label = j.at("label").get<int>();
        if (!ex.labels.empty()) ex.label = ex.labels[0];
      } else if (task == "SQR" || task == "QAR") {
        ex.text_a = j.at("query").get<std::string>();
        ex.candidates = j.at("candidates").get<std::vector<std::string>>();
        ex.relevant = j.at("relevant").get<std::vector<int>>();
      } else if (task == "BFQ") {
        ex.text_a = j.at("question").get<std::string>();
        ex.answer = j.at("answer").get<std::string>();
        ex.target_text = j.value("analysis", ex.answer);
      } else {  // MCQ, CAG, BAG
        ex.text_a = j.at("question").get<std::string>();
        ex.target_text = j.at("analysis").get<std::string>();
        ex.answer = j.at("answer").get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      fail("load_task_data: " + path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    max_label = std::max(max_label, ex.label);
    for (int l : ex.labels) max_label = std::max(max_label, l);
    data.examples.push_back(std::move(ex));
  }
  if (data.spec.head == HeadKind::Classify && data.spec.name == "KPC")
    data.spec.num_labels = std::max<std::size_t>(data.spec.num_labels,
                                                 static_cast<std::size_t>(max_label + 1));
  return data;
}

inline void save_task_data(const TaskData& data, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "save_task_data: cannot open " + path);
  const std::string& task = data.spec.name;
  for (const TaskExample& ex : data.examples) {
    nlohmann::json j;
    if (task == "QRC") {
      j["q1"] = ex.text_a;
      j["q2"] = ex.text_b;
      j["label"] = ex.label;
    } else if (task == "QAM") {
      j["question"] = ex.text_a;
      j["answer"] = ex.text_b;
      j["label"] = ex.label;
    } else if (task == "KPC") {
      j["question"] = ex.text_a;
      if (!ex.labels.empty())
        j["labels"] = ex.labels;
      else
        j["label"] = ex.label;
    } else if (task == "SQR" || task == "QAR") {
      j["query"] = ex.text_a;
      j["candidates"] = ex.candidates;
      j["relevant"] = ex.relevant;
    } else if (task == "BFQ") {
      j["question"] = ex.text_a;
      j["answer"] = ex.answer;
    } else {
      j["question"] = ex.text_a;
      j["analysis"] = ex.target_text;
      j["answer"] = ex.answer;
    }
    out << j.dump() << "\n";
  }
}

/// Synthetic fixture datasets derived from the same problem templates as the
/// synthetic corpus; enough to exercise every task end to end at desk scale.
inline TaskData make_synthetic_task(const std::string& task, std::size_t count,
                                    std::uint64_t seed, const TaskFlags& flags = {}) {
  TaskData data;
  data.spec = task_spec(task, task == "KPC" ? 4 : 0, flags);
  auto fresh = [&](Rng& rng) { return detail::synth_template(rng.uniform_int(4), rng); };
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(Rng::mix(seed, 0x7a58, i));
    TaskExample ex;
    if (task == "KPC") {
      auto p = fresh(rng);
      ex.text_a = p.statement;
      ex.label = static_cast<int>(p.kind);
      if (flags.kpc_multilabel) ex.labels = {ex.label};
    } else if (task == "QRC") {
      auto p = fresh(rng);
      ex.text_a = p.statement;
      std::size_t rel = i % 3;
      if (rel == 0) {  // equivalent
        ex.text_b = p.statement;
        ex.label = 0;
      } else if (rel == 1) {  // similar: same template, new numbers
        auto q = detail::synth_template(p.kind, rng);
        ex.text_b = q.statement;
        ex.label = 1;
      } else {  // irrelevant: different template
        auto q = detail::synth_template(p.kind + 1, rng);
        ex.text_b = q.statement;
        ex.label = 5;
      }
    } else if (task == "QAM") {
      auto p = fresh(rng);
      ex.text_a = p.statement;
      if (i % 2 == 0) {
        ex.text_b = p.solution;
        ex.label = 1;
      } else {
        ex.text_b = detail::synth_template(p.kind + 1, rng).solution;
        ex.label = 0;
      }
    } else if (task == "SQR" || task == "QAR") {
      auto p = fresh(rng);
      ex.text_a = p.statement;
      std::size_t pool = 6;
      std::size_t rel_at = rng.uniform_int(pool);
      for (std::size_t c = 0; c < pool; ++c) {
        if (c == rel_at) {
          ex.candidates.push_back(task == "SQR" ? p.statement : p.solution);
        } else {
          auto q = detail::synth_template(p.kind + 1 + c, rng);
          ex.candidates.push_back(task == "SQR" ? q.statement : q.solution);
        }
      }
      ex.relevant = {static_cast<int>(rel_at)};
    } else if (task == "BFQ") {
      auto p = fresh(rng);
      ex.text_a = p.statement;
      ex.answer = std::to_string(p.answer);
      ex.target_text = "the answer is " + ex.answer + " .";
    } else if (task == "MCQ" || task == "CAG") {
      auto p = fresh(rng);
      long correct = p.answer;
      std::vector<long> options = {correct, correct + 1, correct + 2, correct - 1};
      std::size_t pos = rng.uniform_int(4);
      std::swap(options[0], options[pos]);
      const char* letters = "ABCD";
      std::string q = p.statement;
      for (std::size_t c = 0; c < 4; ++c)
        q += std::string(" ") + letters[c] + " . " + std::to_string(options[c]);
      std::string letter(1, letters[pos]);
      ex.text_a = q;
      ex.target_text = p.solution + " 故选 " + letter + " .";
      ex.answer = letter;
    } else if (task == "BAG") {
      auto p = fresh(rng);
      ex.text_a = p.statement;
      ex.target_text = p.solution;
      ex.answer = std::to_string(p.answer);
    } else {
      fail("make_synthetic_task: unknown task " + task);
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

// -- fine-tuning ----------------------------------------------------------------

struct FinetuneConfig {
  std::int64_t steps = 200;
  std::size_t batch_size = 8;
  OptimizerConfig optimizer;
  std::uint64_t seed = 42;
  std::size_t max_out = 128;
};

/// Per-example fine-tune loss on the shared graph.
inline NodeId finetune_loss_node(ModelGraph& g, const TaskSpec& spec, const TaskExample& ex,
                                 const Vocab& vocab) {
  const std::size_t max_len = g.params().config.max_len;
  if (spec.head == HeadKind::Generate) {
    auto inputs = build_task_input(spec, ex.text_a, "", vocab, max_len);
    std::vector<int> target = encode(split_words(ex.target_text), vocab).ids;
    require(!target.empty(), "finetune: empty generation target");
    if (target.size() + 1 > max_len) target.resize(max_len - 1);
    target.push_back(kSep);
    return seq2seq_loss_node(g, inputs[0].ids, target);
  }
  if (spec.head == HeadKind::Classify) {
    auto inputs = build_task_input(spec, ex.text_a, ex.text_b, vocab, max_len);
    if (spec.multilabel)
      return multilabel_loss_node(g, inputs[0].ids, ex.labels.empty() ? std::vector<int>{ex.label} : ex.labels,
                                  spec.num_labels);
    require(ex.label >= 0 && static_cast<std::size_t>(ex.label) < spec.num_labels,
            "finetune: label out of range");
    return classify_loss_node(g, inputs[0].ids, ex.label);
  }
  // Ranking: mean pairwise logistic loss over the candidate pool.
  Tape& t = g.tape();
  std::vector<NodeId> parts;
  for (std::size_t c = 0; c < ex.candidates.size(); ++c) {
    bool rel = std::find(ex.relevant.begin(), ex.relevant.end(), static_cast<int>(c)) !=
               ex.relevant.end();
    auto inputs = build_task_input(spec, ex.text_a, ex.candidates[c], vocab, max_len);
    NodeId score;
    if (spec.head == HeadKind::RankCross) {
      score = rank_score_node(g, inputs[0].ids);
    } else {
      NodeId pq = g.pooled_cls(g.u_states(g.encode_ids(inputs[0].ids)), inputs[0].ids);
      NodeId pc = g.pooled_cls(g.u_states(g.encode_ids(inputs[1].ids)), inputs[1].ids);
      score = t.matmul_t(pq, pc);
    }
    parts.push_back(t.logistic_loss(score, rel ? real(1) : real(0)));
  }
  require(!parts.empty(), "finetune: ranking example with no candidates");
  return t.sum_scaled(parts, std::vector<real>(parts.size(), real(1) / real(parts.size())));
}

/// Task-specific fine-tuning with AdamW; returns the per-step loss trace.
inline TrainStats finetune_task(ModelParams& params, AdamState& opt_state, const Vocab& vocab,
                                const TaskData& data, const FinetuneConfig& cfg) {
  require(!data.examples.empty(), "finetune_task: empty dataset");
  ensure_task_head(params, data.spec, cfg.seed);
  TrainStats stats;
  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    Rng rng(Rng::mix(cfg.seed, 0xf173, static_cast<std::uint64_t>(step)));
    Tape tape;
    Rng drop_rng(Rng::mix(cfg.seed, 0xd409, static_cast<std::uint64_t>(step)));
    ModelGraph graph(tape, params, &drop_rng);
    std::vector<NodeId> parts;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const TaskExample& ex = data.examples[rng.uniform_int(data.examples.size())];
      parts.push_back(finetune_loss_node(graph, data.spec, ex, vocab));
    }
    NodeId total = tape.sum_scaled(parts, std::vector<real>(parts.size(), real(1) / real(parts.size())));
    StepRecord rec;
    rec.step = step;
    rec.course = 0;
    rec.lr = lr_schedule(step, cfg.optimizer);
    rec.total = tape.value(total).data[0];
    rec.task_losses.emplace_back(data.spec.name, rec.total);
    if (!std::isfinite(rec.total))
      fail("finetune_task: non-finite loss at step " + std::to_string(step));
    tape.backward(total);
    GradMap grads = tape.param_grads();
    for (const auto& [name, t] : params.tensors) grads.try_emplace(name, Tensor::zeros(t.shape));
    adamw_step(params.tensors, grads, opt_state, cfg.optimizer, step, rec.lr);
    stats.steps.push_back(std::move(rec));
  }
  return stats;
}

// -- evaluation -----------------------------------------------------------------

struct EvalReport {
  std::string task;
  std::size_t count = 0;
  std::map<std::string, real> metrics;  // values in [0,1]

  nlohmann::json to_json() const {
    return {{"task", task}, {"count", count}, {"metrics", metrics}};
  }
};

/// Runs the task's metric set over a dataset. Deterministic.
inline EvalReport evaluate_task(const ModelParams& params, const Vocab& vocab,
                                const TaskData& data, std::size_t max_out = 128) {
  require(!data.examples.empty(), "evaluate_task: empty dataset");
  const TaskSpec& spec = data.spec;
  EvalReport report;
  report.task = spec.name;
  report.count = data.examples.size();

  if (spec.head == HeadKind::Classify) {
    std::vector<int> preds, golds;
    for (const TaskExample& ex : data.examples) {
      auto inputs = build_task_input(spec, ex.text_a, ex.text_b, vocab, params.config.max_len);
      std::vector<real> probs = classify(params, inputs[0].ids);
      int pred = 0;
      for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[static_cast<std::size_t>(pred)]) pred = static_cast<int>(i);
      preds.push_back(pred);
      golds.push_back(ex.label);
    }
    report.metrics["accuracy"] = accuracy(preds, golds);
    report.metrics["f1_macro"] = f1_macro(preds, golds, spec.num_labels);
    return report;
  }

  if (spec.head == HeadKind::RankCross || spec.head == HeadKind::RankDual) {
    real hr = 0, ndcg = 0;
    for (const TaskExample& ex : data.examples) {
      auto ranked = rank_candidates(params, vocab, spec, ex.text_a, ex.candidates);
      std::vector<real> rel;
      for (const RankedCandidate& rc : ranked) {
        bool r = std::find(ex.relevant.begin(), ex.relevant.end(),
                           static_cast<int>(rc.index)) != ex.relevant.end();
        rel.push_back(r ? real(1) : real(0));
      }
      hr += hit_ratio_at_k(rel, 3);
      ndcg += ndcg_at_k(rel, 3);
    }
    report.metrics["hr3"] = hr / real(data.examples.size());
    report.metrics["ndcg3"] = ndcg / real(data.examples.size());
    return report;
  }

  // Generation tasks.
  std::size_t correct = 0;
  real bleu = 0, r2 = 0, rl = 0;
  for (const TaskExample& ex : data.examples) {
    auto inputs = build_task_input(spec, ex.text_a, "", vocab, params.config.max_len);
    std::vector<int> out_ids = generate_greedy(params, inputs[0].ids, max_out);
    std::vector<std::string> out_words = decode(out_ids, vocab);
    std::string out_text = join_words(out_words);
    if (spec.name == "MCQ" || spec.name == "CAG") {
      if (extract_choice(out_words) == ex.answer) ++correct;
    } else {
      if (numeric_match(out_text, ex.answer)) ++correct;
    }
    if (spec.name == "CAG" || spec.name == "BAG") {
      std::vector<std::string> ref = split_words(ex.target_text);
      bleu += bleu4(out_words, ref);
      r2 += rouge_n(out_words, ref, 2);
      rl += rouge_l(out_words, ref);
    }
  }
  report.metrics["accuracy"] = real(correct) / real(data.examples.size());
  if (spec.name == "CAG" || spec.name == "BAG") {
    report.metrics["bleu4"] = bleu / real(data.examples.size());
    report.metrics["rouge2"] = r2 / real(data.examples.size());
    report.metrics["rougeL"] = rl / real(data.examples.size());
  }
  return report;
}

}  // namespace jz
