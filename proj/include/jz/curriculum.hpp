#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jz/checking.hpp"
#include "jz/corpus.hpp"
#include "jz/losses.hpp"
#include "jz/optim.hpp"

namespace jz {

/**
 * Three-course schedule: M1 steps of masked token prediction, M2 of
 * mathematical-logic recovering, M3 of solution checking. `gamma` routes
 * each batch between understanding-decoder objectives (MLM, USC) and
 * generation-decoder objectives (DAE, GSC); 0.5 reproduces the plain
 * half-and-half split. The sentence/formula pass of course 2 is always an
 * even split between SSR and SFR.
 */
struct CurriculumConfig {
  std::int64_t m1 = 0;
  std::int64_t m2 = 0;
  std::int64_t m3 = 0;
  std::size_t batch_size = 8;
  real gamma = real(0.5);
  OptimizerConfig optimizer;
  std::uint64_t seed = 42;

  // Ablation and variant switches.
  bool reverse_courses = false;       // checking -> logic -> basic
  bool multitask = false;             // all tasks jointly, no course ordering
  bool ssr_include_statement = true;  // condition SSR/SFR on the problem statement
  bool self_check = false;            // decoders also correct their own fills
  bool lr_reset_per_course = false;   // restart the LR schedule at each course
  CorruptionOptions corruption;

  std::int64_t total_steps() const { return m1 + m2 + m3; }

  void validate() const {
    require(m1 >= 0 && m2 >= 0 && m3 >= 0, "curriculum: step counts must be >= 0");
    require(batch_size >= 1, "curriculum: batch_size must be >= 1");
    require(gamma >= 0 && gamma <= 1, "curriculum: gamma must lie in [0,1]");
    optimizer.validate();
  }
};

struct TaskBatch {
  std::string task;                 // mlm | dae | ssr | sfr | usc | gsc
  std::vector<std::size_t> records; // indices into the corpus
};

struct StepRecord {
  std::int64_t step = 0;
  int course = 0;  // 1..3, or 0 in multi-task mode
  real lr = 0;
  std::vector<std::pair<std::string, real>> task_losses;
  real total = 0;
};

struct TrainStats {
  std::vector<StepRecord> steps;

  static nlohmann::json record_json(const StepRecord& r) {
    nlohmann::json tasks = nlohmann::json::object();
    for (const auto& [name, v] : r.task_losses) tasks[name] = v;
    return {{"step", r.step}, {"course", r.course}, {"lr", r.lr}, {"tasks", tasks},
            {"total", r.total}};
  }

  std::string to_jsonl() const {
    std::string out;
    for (const StepRecord& r : steps) out += record_json(r).dump() + "\n";
    return out;
  }
};

namespace detail {

inline std::size_t u_share(std::size_t batch, real gamma) {
  return static_cast<std::size_t>(std::llround(double(gamma) * double(batch)));
}

}  // namespace detail

/**
 * Batch routing for one step of one course. Every course carries the MLM/DAE
 * regularizer split; course 2 adds the SSR/SFR halves over the same batch
 * and course 3 adds the USC/GSC checking split.
 */
inline std::vector<TaskBatch> make_course_batches(const CorpusFile& corpus, int course,
                                                  std::int64_t step,
                                                  const CurriculumConfig& cfg) {
  require(!corpus.records.empty(), "make_course_batches: empty corpus");
  require(course >= 0 && course <= 3, "make_course_batches: course must be 0..3");
  Rng rng(Rng::mix(cfg.seed, 0xb47c5, static_cast<std::uint64_t>(step)));
  std::vector<std::size_t> batch(cfg.batch_size);
  for (auto& r : batch) r = rng.uniform_int(corpus.records.size());

  const std::size_t n_u = detail::u_share(cfg.batch_size, cfg.gamma);
  std::vector<TaskBatch> out;
  auto slice = [&](std::size_t from, std::size_t to) {
    return std::vector<std::size_t>(batch.begin() + from, batch.begin() + to);
  };
  auto add = [&](const char* task, std::vector<std::size_t> recs) {
    if (!recs.empty()) out.push_back({task, std::move(recs)});
  };

  add("mlm", slice(0, n_u));
  add("dae", slice(n_u, cfg.batch_size));
  if (course == 2 || course == 0) {
    std::size_t half = (cfg.batch_size + 1) / 2;
    add("ssr", slice(0, half));
    add("sfr", slice(half, cfg.batch_size));
  }
  if (course == 3 || course == 0) {
    add("usc", slice(0, n_u));
    add("gsc", slice(n_u, cfg.batch_size));
  }
  return out;
}

/**
 * One optimizer step: build every task loss of the batch on a single tape,
 * sum them (the course loss is the plain unweighted sum of its task losses),
 * backpropagate once and apply AdamW at the given learning rate. The logged
 * total is the same floating-point sum of the logged components.
 */
inline StepRecord train_step(ModelParams& params, const CorpusFile& corpus, const Vocab& vocab,
                             const std::vector<TaskBatch>& batches, AdamState& opt_state,
                             std::int64_t step, real lr, const CurriculumConfig& cfg,
                             int course, std::vector<FilledSolution>* fill_sink = nullptr) {
  Tape tape;
  Rng drop_rng(Rng::mix(cfg.seed, 0xd409, static_cast<std::uint64_t>(step)));
  ModelGraph graph(tape, params, &drop_rng);

  StepRecord rec;
  rec.step = step;
  rec.course = course;
  rec.lr = lr;

  std::vector<NodeId> task_nodes;
  std::uint64_t slot = 0;
  for (const TaskBatch& tb : batches) {
    std::vector<NodeId> parts;
    std::vector<NodeId> self_parts;
    for (std::size_t ri : tb.records) {
      const MathText& mt = corpus.records[ri];
      std::uint64_t ex_seed = Rng::mix(cfg.seed, static_cast<std::uint64_t>(step), slot++);
      NodeId node = -1;
      if (tb.task == "mlm" || tb.task == "dae") {
        Kind kind = tb.task == "mlm" ? Kind::MLM : Kind::DAE;
        CorruptedExample ex = make_masked_example(encode_pretrain(mt, vocab), vocab, ex_seed,
                                                  kind, cfg.corruption);
        node = kind == Kind::MLM ? mlm_loss_node(graph, ex) : dae_loss_node(graph, ex);
      } else if (tb.task == "ssr") {
        node = ssr_loss_node(graph, shuffle_sentences(mt, vocab, ex_seed),
                             cfg.ssr_include_statement);
      } else if (tb.task == "sfr") {
        node = sfr_loss_node(graph, shuffle_formulas(mt, vocab, ex_seed),
                             cfg.ssr_include_statement);
      } else if (tb.task == "usc" || tb.task == "gsc") {
        CorruptedExample ex = make_masked_example(encode_wrapped(mt.solution, vocab), vocab,
                                                  ex_seed, Kind::MLM, cfg.corruption);
        if (tb.task == "usc") {
          FilledSolution filled = g_fill_masked(params, ex);
          if (fill_sink) fill_sink->push_back(filled);
          node = usc_loss_node(graph, filled);
          if (cfg.self_check) self_parts.push_back(self_check_node(graph, u_fill_masked(params, ex)));
        } else {
          FilledSolution filled = u_fill_masked(params, ex);
          if (fill_sink) fill_sink->push_back(filled);
          node = gsc_loss_node(graph, filled);
          if (cfg.self_check) self_parts.push_back(self_check_node(graph, g_fill_masked(params, ex)));
        }
      } else {
        fail("train_step: unknown task " + tb.task);
      }
      if (node >= 0) parts.push_back(node);
    }
    if (parts.empty()) {
      rec.task_losses.emplace_back(tb.task, real(0));
    } else {
      NodeId task_node = tape.sum_scaled(parts, std::vector<real>(parts.size(), real(1) / real(parts.size())));
      task_nodes.push_back(task_node);
      rec.task_losses.emplace_back(tb.task, tape.value(task_node).data[0]);
    }
    if (!self_parts.empty()) {
      NodeId self_node = tape.sum_scaled(
          self_parts, std::vector<real>(self_parts.size(), real(1) / real(self_parts.size())));
      task_nodes.push_back(self_node);
      rec.task_losses.emplace_back(tb.task + "_self", tape.value(self_node).data[0]);
    }
  }
  require(!task_nodes.empty(), "train_step: no loss terms");
  NodeId total = tape.sum_scaled(task_nodes, std::vector<real>(task_nodes.size(), real(1)));
  rec.total = tape.value(total).data[0];
  if (!std::isfinite(rec.total))
    fail("train_step: non-finite loss at step " + std::to_string(step));

  tape.backward(total);
  GradMap grads = tape.param_grads();
  for (const auto& [name, t] : params.tensors)
    grads.try_emplace(name, Tensor::zeros(t.shape));
  adamw_step(params.tensors, grads, opt_state, cfg.optimizer, step, lr);
  return rec;
}

/// Course label of a 1-based global step under the configured ordering.
inline int course_of_step(std::int64_t step, const CurriculumConfig& cfg) {
  if (cfg.multitask) return 0;
  std::vector<std::pair<int, std::int64_t>> phases;
  if (cfg.reverse_courses)
    phases = {{3, cfg.m3}, {2, cfg.m2}, {1, cfg.m1}};
  else
    phases = {{1, cfg.m1}, {2, cfg.m2}, {3, cfg.m3}};
  std::int64_t upto = 0;
  for (auto [course, len] : phases) {
    upto += len;
    if (step <= upto) return course;
  }
  return phases.back().first;
}

/**
 * The curriculum: course 1 for M1 steps, course 2 for M2, course 3 for M3,
 * with one optimizer state carried across course boundaries and one global
 * learning-rate schedule (optionally reset per course). `start_step` > 0
 * resumes a checkpointed run; the derived per-step seeds make the
 * continuation identical to an uninterrupted run.
 */
inline TrainStats run_curriculum(const CorpusFile& corpus, const Vocab& vocab,
                                 ModelParams& params, AdamState& opt_state,
                                 const CurriculumConfig& cfg, std::int64_t start_step = 0,
                                 const std::function<void(const StepRecord&)>& on_step = nullptr,
                                 std::vector<FilledSolution>* fill_sink = nullptr,
                                 std::int64_t end_step = -1) {
  cfg.validate();
  require(!corpus.records.empty(), "run_curriculum: empty corpus");
  TrainStats stats;
  std::int64_t last = end_step < 0 ? cfg.total_steps() : std::min(end_step, cfg.total_steps());
  for (std::int64_t step = start_step + 1; step <= last; ++step) {
    int course = course_of_step(step, cfg);
    real lr;
    if (cfg.lr_reset_per_course && !cfg.multitask) {
      std::int64_t before = 0;  // steps consumed by earlier courses
      std::vector<std::pair<int, std::int64_t>> phases =
          cfg.reverse_courses ? std::vector<std::pair<int, std::int64_t>>{{3, cfg.m3}, {2, cfg.m2}, {1, cfg.m1}}
                              : std::vector<std::pair<int, std::int64_t>>{{1, cfg.m1}, {2, cfg.m2}, {3, cfg.m3}};
      for (auto [c, len] : phases) {
        if (c == course) break;
        before += len;
      }
      OptimizerConfig per_course = cfg.optimizer;
      per_course.total_steps = course == 1 ? cfg.m1 : course == 2 ? cfg.m2 : cfg.m3;
      per_course.warmup_steps = std::min(per_course.warmup_steps, per_course.total_steps);
      lr = lr_schedule(step - before, per_course);
    } else {
      lr = lr_schedule(step, cfg.optimizer);
    }
    auto batches = make_course_batches(corpus, course, step, cfg);
    StepRecord rec =
        train_step(params, corpus, vocab, batches, opt_state, step, lr, cfg, course, fill_sink);
    if (on_step) on_step(rec);
    stats.steps.push_back(std::move(rec));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Evaluation probes used by the pre-training CLI and the acceptance suite.
// ---------------------------------------------------------------------------

/// Masked-token prediction accuracy over fresh corruption draws.
inline real mlm_accuracy(const ModelParams& params, const Vocab& vocab, const CorpusFile& corpus,
                         std::uint64_t seed, std::size_t draws_per_record = 2) {
  std::size_t hits = 0, total = 0;
  for (std::size_t ri = 0; ri < corpus.records.size(); ++ri) {
    TokenSequence ts = encode_pretrain(corpus.records[ri], vocab);
    for (std::size_t d = 0; d < draws_per_record; ++d) {
      CorruptedExample ex = make_masked_example(ts, vocab, Rng::mix(seed, ri, d), Kind::MLM);
      if (ex.masked_positions.empty()) continue;
      Tensor logits = u_decode_logits(params, ex.input.ids);
      for (std::size_t pos : ex.masked_positions) {
        hits += argmax_row(logits, pos) == ex.target.ids[pos];
        ++total;
      }
    }
  }
  return total == 0 ? real(0) : real(hits) / real(total);
}

/// Teacher-forced token accuracy of the denoising reconstruction.
inline real dae_accuracy(const ModelParams& params, const Vocab& vocab, const CorpusFile& corpus,
                         std::uint64_t seed, std::size_t draws_per_record = 1) {
  std::size_t hits = 0, total = 0;
  for (std::size_t ri = 0; ri < corpus.records.size(); ++ri) {
    TokenSequence ts = encode_pretrain(corpus.records[ri], vocab);
    for (std::size_t d = 0; d < draws_per_record; ++d) {
      CorruptedExample ex = make_masked_example(ts, vocab, Rng::mix(seed, ri, d), Kind::DAE);
      std::vector<int> target(ex.target.ids.begin() + 1, ex.target.ids.end());
      std::vector<int> prefix;
      prefix.push_back(kCls);
      prefix.insert(prefix.end(), target.begin(), target.end() - 1);
      Tensor logits = g_decode_logits(params, ex.input.ids, prefix);
      for (std::size_t i = 0; i < target.size(); ++i) {
        hits += argmax_row(logits, i) == target[i];
        ++total;
      }
    }
  }
  return total == 0 ? real(0) : real(hits) / real(total);
}

/// Fraction of records whose solution a greedy decode recovers exactly from
/// a shuffled input (sentences for SSR, formulas for SFR).
inline real shuffle_exact_match(const ModelParams& params, const Vocab& vocab,
                                const CorpusFile& corpus, Kind kind, std::uint64_t seed,
                                bool include_statement = true) {
  require(kind == Kind::SSR || kind == Kind::SFR, "shuffle_exact_match: SSR or SFR only");
  std::size_t hits = 0;
  for (std::size_t ri = 0; ri < corpus.records.size(); ++ri) {
    const MathText& mt = corpus.records[ri];
    CorruptedExample ex = kind == Kind::SSR ? shuffle_sentences(mt, vocab, Rng::mix(seed, ri))
                                            : shuffle_formulas(mt, vocab, Rng::mix(seed, ri));
    std::vector<int> enc_ids = wrap_with_context(
        include_statement ? ex.statement_ids : std::vector<int>{}, ex.input.ids);
    std::vector<int> out = generate_greedy(params, enc_ids, ex.target.size() + 8);
    hits += out == ex.target.ids;
  }
  return real(hits) / real(corpus.records.size());
}

/// Mean SSR loss over a held-out corpus with a fixed shuffle seed.
inline real eval_ssr_loss(const ModelParams& params, const Vocab& vocab, const CorpusFile& corpus,
                          std::uint64_t seed, bool include_statement = true) {
  require(!corpus.records.empty(), "eval_ssr_loss: empty corpus");
  real sum = 0;
  for (std::size_t ri = 0; ri < corpus.records.size(); ++ri) {
    CorruptedExample ex = shuffle_sentences(corpus.records[ri], vocab, Rng::mix(seed, ri));
    sum += ssr_loss(params, ex, include_statement);
  }
  return sum / real(corpus.records.size());
}

}  // namespace jz
