#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "jz/checkpoint.hpp"
#include "jz/config.hpp"

namespace jz {

namespace detail {

inline CorpusFile obtain_corpus(const RunConfig& cfg) {
  if (cfg.synthetic_count > 0) return generate_synthetic_corpus(cfg.synthetic_count, cfg.seed);
  require(!cfg.corpus_path.empty(), "no corpus: pass --corpus <path> or --synthetic <count>");
  return load_corpus(cfg.corpus_path);
}

inline Vocab obtain_vocab(const RunConfig& cfg, const CorpusFile* corpus) {
  if (!cfg.vocab_path.empty()) return Vocab::load(cfg.vocab_path);
  require(corpus != nullptr, "no vocabulary: pass --vocab <path>");
  return build_vocab(*corpus, cfg.vocab_max);
}

inline void write_stats(const TrainStats& stats, const RunConfig& cfg) {
  std::string path = cfg.stats_out.empty()
                         ? (std::filesystem::path(cfg.out_dir) / "stats.jsonl").string()
                         : cfg.stats_out;
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  require(out.good(), "cannot write stats to " + path);
  out << stats.to_jsonl();
}

}  // namespace detail

/**
 * preprocess: load (or synthesize) a corpus, normalize and annotate it,
 * build the vocabulary, and write corpus.jsonl / vocab.txt / tokens.jsonl
 * under --out-dir. Optional extras: --emit-corruptions dumps one example of
 * each corruption flavor per record; --emit-tasks writes synthetic
 * fine-tuning fixtures for all nine downstream tasks.
 */
inline int cmd_preprocess(const RunConfig& cfg) {
  CorpusFile corpus = detail::obtain_corpus(cfg);
  for (MathText& mt : corpus.records) {
    mt.statement = split_words(normalize_math_text(join_words(mt.statement)));
    mt.solution = split_words(normalize_math_text(join_words(mt.solution)));
    annotate(mt);
    validate_math_text(mt);
  }
  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path out(cfg.out_dir);
  save_corpus(corpus, (out / "corpus.jsonl").string());

  Vocab vocab = build_vocab(corpus, cfg.vocab_max);
  vocab.save((out / "vocab.txt").string());

  std::ofstream tokens(out / "tokens.jsonl");
  for (const MathText& mt : corpus.records) {
    nlohmann::json j;
    j["id"] = mt.id;
    j["ids"] = encode_pretrain(mt, vocab).ids;
    tokens << j.dump() << "\n";
  }

  if (cfg.emit_corruptions) {
    std::ofstream dump(out / "corruptions.jsonl");
    for (std::size_t ri = 0; ri < corpus.records.size(); ++ri) {
      const MathText& mt = corpus.records[ri];
      TokenSequence full = encode_pretrain(mt, vocab);
      std::uint64_t s = Rng::mix(cfg.seed, 0xc0bb, ri);
      dump << corruption_to_json(make_masked_example(full, vocab, Rng::mix(s, 0), Kind::MLM,
                                                     cfg.curriculum.corruption)).dump() << "\n";
      dump << corruption_to_json(make_masked_example(full, vocab, Rng::mix(s, 1), Kind::DAE,
                                                     cfg.curriculum.corruption)).dump() << "\n";
      dump << corruption_to_json(shuffle_sentences(mt, vocab, Rng::mix(s, 2))).dump() << "\n";
      dump << corruption_to_json(shuffle_formulas(mt, vocab, Rng::mix(s, 3))).dump() << "\n";
    }
  }

  if (cfg.emit_tasks) {
    std::filesystem::create_directories(out / "tasks");
    for (const char* task : {"KPC", "QRC", "QAM", "SQR", "QAR", "MCQ", "BFQ", "CAG", "BAG"}) {
      TaskData train = make_synthetic_task(task, 32, Rng::mix(cfg.seed, 0x7215), cfg.task_flags);
      TaskData test = make_synthetic_task(task, 16, Rng::mix(cfg.seed, 0x7e57), cfg.task_flags);
      save_task_data(train, (out / "tasks" / (std::string(task) + ".train.jsonl")).string());
      save_task_data(test, (out / "tasks" / (std::string(task) + ".test.jsonl")).string());
    }
  }
  return 0;
}

/// pretrain: run the three-course curriculum and write checkpoint + stats.
inline int cmd_pretrain(const RunConfig& cfg) {
  CorpusFile corpus = detail::obtain_corpus(cfg);
  Vocab vocab = detail::obtain_vocab(cfg, &corpus);

  CurriculumConfig cur = cfg.curriculum;
  cur.seed = cfg.seed;
  if (cur.optimizer.total_steps <= 0 ||
      cur.optimizer.total_steps < cur.total_steps())
    cur.optimizer.total_steps = cur.total_steps();
  cur.optimizer.warmup_steps = std::min(cur.optimizer.warmup_steps, cur.optimizer.total_steps);

  ModelParams params;
  AdamState opt;
  std::int64_t start_step = 0;
  if (!cfg.init_from.empty()) {
    Checkpoint ck = load_checkpoint(cfg.init_from);
    params = std::move(ck.params);
    opt = std::move(ck.opt);
    start_step = ck.trained_steps;
    require(params.config.vocab_size == vocab.size(),
            "pretrain: checkpoint vocab size does not match the vocabulary file");
  } else {
    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    params = build_model(mc, cfg.seed);
  }

  std::vector<FilledSolution> fills;
  TrainStats stats = run_curriculum(corpus, vocab, params, opt, cur, start_step, nullptr,
                                    cfg.dump_filled ? &fills : nullptr);

  std::filesystem::create_directories(cfg.out_dir);
  save_checkpoint(params, &opt, start_step + stats.steps.size(),
                  (std::filesystem::path(cfg.out_dir) / "checkpoint").string());
  detail::write_stats(stats, cfg);

  if (cfg.dump_filled) {
    std::ofstream dump(std::filesystem::path(cfg.out_dir) / "filled.jsonl");
    for (const FilledSolution& f : fills) {
      nlohmann::json j;
      j["source"] = f.source == FillSource::U ? "U" : "G";
      j["ids"] = f.ids;
      j["original"] = f.original;
      j["masked_positions"] = f.masked_positions;
      dump << j.dump() << "\n";
    }
  }
  return 0;
}

/// finetune: task-specific training on top of a checkpoint.
inline int cmd_finetune(const RunConfig& cfg) {
  require(!cfg.task.empty(), "finetune: pass --task <name>");
  require(!cfg.data_path.empty(), "finetune: pass --data <jsonl>");
  Vocab vocab = detail::obtain_vocab(cfg, nullptr);

  ModelParams params;
  if (!cfg.init_from.empty()) {
    params = load_checkpoint(cfg.init_from).params;
    require(params.config.vocab_size == vocab.size(),
            "finetune: checkpoint vocab size does not match the vocabulary file");
  } else {
    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    params = build_model(mc, cfg.seed);
  }

  TaskData data = load_task_data(task_spec(cfg.task, cfg.num_labels, cfg.task_flags),
                                 cfg.data_path);

  FinetuneConfig ft;
  ft.steps = cfg.finetune_steps;
  ft.batch_size = cfg.finetune_batch;
  ft.seed = cfg.seed;
  ft.max_out = cfg.max_out;
  ft.optimizer = cfg.curriculum.optimizer;
  // Appendix-style defaults: 3e-5 for understanding heads, 5e-5 for generation.
  ft.optimizer.learning_rate =
      cfg.finetune_lr > 0 ? cfg.finetune_lr
                          : (data.spec.is_understanding() ? real(3e-5) : real(5e-5));
  ft.optimizer.total_steps = ft.steps;
  ft.optimizer.warmup_steps = std::min<std::int64_t>(cfg.curriculum.optimizer.warmup_steps,
                                                     std::max<std::int64_t>(ft.steps / 10, 0));

  AdamState opt;
  TrainStats stats = finetune_task(params, opt, vocab, data, ft);

  std::filesystem::create_directories(cfg.out_dir);
  save_checkpoint(params, &opt, stats.steps.size(),
                  (std::filesystem::path(cfg.out_dir) / "checkpoint").string());
  detail::write_stats(stats, cfg);
  return 0;
}

/// eval: metric report for a task dataset against a checkpoint.
inline int cmd_eval(const RunConfig& cfg) {
  require(!cfg.task.empty(), "eval: pass --task <name>");
  require(!cfg.data_path.empty(), "eval: pass --data <jsonl>");
  require(!cfg.init_from.empty(), "eval: pass --init-from <checkpoint dir>");
  Vocab vocab = detail::obtain_vocab(cfg, nullptr);
  ModelParams params = load_checkpoint(cfg.init_from).params;
  require(params.config.vocab_size == vocab.size(),
          "eval: checkpoint vocab size does not match the vocabulary file");

  TaskData data = load_task_data(task_spec(cfg.task, cfg.num_labels, cfg.task_flags),
                                 cfg.data_path);
  EvalReport report = evaluate_task(params, vocab, data, cfg.max_out);
  std::string text = report.to_json().dump(2);
  if (cfg.report_out.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(cfg.report_out);
    require(out.good(), "eval: cannot write " + cfg.report_out);
    out << text << "\n";
  }
  return 0;
}

/// generate: greedy decode a solution for one problem statement.
inline int cmd_generate(const RunConfig& cfg) {
  require(!cfg.init_from.empty(), "generate: pass --init-from <checkpoint dir>");
  require(!cfg.input_text.empty(), "generate: pass --input \"<statement>\"");
  Vocab vocab = detail::obtain_vocab(cfg, nullptr);
  ModelParams params = load_checkpoint(cfg.init_from).params;
  require(params.config.vocab_size == vocab.size(),
          "generate: checkpoint vocab size does not match the vocabulary file");
  std::vector<std::string> words = split_words(normalize_math_text(cfg.input_text));
  TokenSequence input = encode_wrapped(words, vocab);
  std::vector<int> out = generate_greedy(params, input.ids, cfg.max_out);
  std::cout << join_words(decode(out, vocab)) << "\n";
  return 0;
}

inline int run_command(const RunConfig& cfg) {
  if (cfg.command == "preprocess") return cmd_preprocess(cfg);
  if (cfg.command == "pretrain") return cmd_pretrain(cfg);
  if (cfg.command == "finetune") return cmd_finetune(cfg);
  if (cfg.command == "eval") return cmd_eval(cfg);
  if (cfg.command == "generate") return cmd_generate(cfg);
  fail("unknown command: " + cfg.command);
}

}  // namespace jz
