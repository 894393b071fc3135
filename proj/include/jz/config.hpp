#pragma once

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "jz/curriculum.hpp"
#include "jz/finetune.hpp"

namespace jz {

/**
 * One run = one RunConfig. Values are resolved in precedence order:
 * built-in defaults, then the --config file, then JZ_* environment
 * variables, then command-line flags.
 */
struct RunConfig {
  std::string command;

  // paths
  std::string corpus_path;
  std::string vocab_path;
  std::string out_dir = "out";
  std::string init_from;   // checkpoint directory to resume / fine-tune from
  std::string data_path;   // task dataset (finetune / eval)
  std::string stats_out;   // training trace JSONL; defaults to <out>/stats.jsonl
  std::string report_out;  // eval report JSON; stdout when empty
  std::string input_text;  // generate: the problem statement

  std::uint64_t seed = 42;
  std::size_t synthetic_count = 0;  // preprocess: generate a corpus instead of loading
  std::size_t vocab_max = 8000;
  bool emit_corruptions = false;
  bool emit_tasks = false;
  bool dump_filled = false;

  ModelConfig model;
  CurriculumConfig curriculum;

  // fine-tuning
  std::string task;
  std::size_t num_labels = 0;
  TaskFlags task_flags;
  std::int64_t finetune_steps = 200;
  std::size_t finetune_batch = 8;
  real finetune_lr = -1;  // < 0: task-dependent default (3e-5 understanding, 5e-5 generation)
  std::size_t max_out = 128;
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail("config: cannot parse boolean value '" + v + "'");
}

}  // namespace detail

/// All supported config keys, also the basis of the JZ_* environment names.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "seed", "out_dir", "corpus", "vocab", "init_from", "data", "stats_out", "report_out",
      "task", "num_labels", "synthetic", "vocab_max", "emit_corruptions", "emit_tasks",
      "dump_filled", "input",
      "model.dim", "model.heads", "model.ffn_dim", "model.enc_layers", "model.u_layers",
      "model.g_layers", "model.max_len", "model.dropout",
      "curriculum.m1", "curriculum.m2", "curriculum.m3", "curriculum.batch_size",
      "curriculum.gamma", "curriculum.reverse_courses", "curriculum.multitask",
      "curriculum.ssr_no_statement", "curriculum.self_check", "curriculum.lr_reset_per_course",
      "curriculum.bernoulli_masking",
      "optimizer.learning_rate", "optimizer.warmup_steps", "optimizer.total_steps",
      "optimizer.weight_decay", "optimizer.beta1", "optimizer.beta2", "optimizer.epsilon",
      "finetune.steps", "finetune.batch_size", "finetune.lr", "finetune.max_out",
      "finetune.kpc_multilabel", "finetune.mcq_classify"};
  return keys;
}

inline void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
  auto sz = [&] { return static_cast<std::size_t>(std::stoull(value)); };
  auto i64 = [&] { return static_cast<std::int64_t>(std::stoll(value)); };
  auto flt = [&] { return static_cast<real>(std::stod(value)); };
  auto b = [&] { return detail::parse_bool(value); };

  if (key == "seed") { cfg.seed = u64(); cfg.curriculum.seed = cfg.seed; }
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "corpus") cfg.corpus_path = value;
  else if (key == "vocab") cfg.vocab_path = value;
  else if (key == "init_from") cfg.init_from = value;
  else if (key == "data") cfg.data_path = value;
  else if (key == "stats_out") cfg.stats_out = value;
  else if (key == "report_out") cfg.report_out = value;
  else if (key == "task") cfg.task = value;
  else if (key == "num_labels") cfg.num_labels = sz();
  else if (key == "synthetic") cfg.synthetic_count = sz();
  else if (key == "vocab_max") cfg.vocab_max = sz();
  else if (key == "emit_corruptions") cfg.emit_corruptions = b();
  else if (key == "emit_tasks") cfg.emit_tasks = b();
  else if (key == "dump_filled") cfg.dump_filled = b();
  else if (key == "input") cfg.input_text = value;
  else if (key == "model.dim") cfg.model.dim = sz();
  else if (key == "model.heads") cfg.model.heads = sz();
  else if (key == "model.ffn_dim") cfg.model.ffn_dim = sz();
  else if (key == "model.enc_layers") cfg.model.enc_layers = sz();
  else if (key == "model.u_layers") cfg.model.u_layers = sz();
  else if (key == "model.g_layers") cfg.model.g_layers = sz();
  else if (key == "model.max_len") cfg.model.max_len = sz();
  else if (key == "model.dropout") cfg.model.dropout = flt();
  else if (key == "curriculum.m1") cfg.curriculum.m1 = i64();
  else if (key == "curriculum.m2") cfg.curriculum.m2 = i64();
  else if (key == "curriculum.m3") cfg.curriculum.m3 = i64();
  else if (key == "curriculum.batch_size") cfg.curriculum.batch_size = sz();
  else if (key == "curriculum.gamma") cfg.curriculum.gamma = flt();
  else if (key == "curriculum.reverse_courses") cfg.curriculum.reverse_courses = b();
  else if (key == "curriculum.multitask") cfg.curriculum.multitask = b();
  else if (key == "curriculum.ssr_no_statement") cfg.curriculum.ssr_include_statement = !b();
  else if (key == "curriculum.self_check") cfg.curriculum.self_check = b();
  else if (key == "curriculum.lr_reset_per_course") cfg.curriculum.lr_reset_per_course = b();
  else if (key == "curriculum.bernoulli_masking") cfg.curriculum.corruption.bernoulli = b();
  else if (key == "optimizer.learning_rate") cfg.curriculum.optimizer.learning_rate = flt();
  else if (key == "optimizer.warmup_steps") cfg.curriculum.optimizer.warmup_steps = i64();
  else if (key == "optimizer.total_steps") cfg.curriculum.optimizer.total_steps = i64();
  else if (key == "optimizer.weight_decay") cfg.curriculum.optimizer.weight_decay = flt();
  else if (key == "optimizer.beta1") cfg.curriculum.optimizer.beta1 = flt();
  else if (key == "optimizer.beta2") cfg.curriculum.optimizer.beta2 = flt();
  else if (key == "optimizer.epsilon") cfg.curriculum.optimizer.epsilon = flt();
  else if (key == "finetune.steps") cfg.finetune_steps = i64();
  else if (key == "finetune.batch_size") cfg.finetune_batch = sz();
  else if (key == "finetune.lr") cfg.finetune_lr = flt();
  else if (key == "finetune.max_out") cfg.max_out = sz();
  else if (key == "finetune.kpc_multilabel") cfg.task_flags.kpc_multilabel = b();
  else if (key == "finetune.mcq_classify") cfg.task_flags.mcq_classify = b();
  else fail("config: unknown key '" + key + "'");
}

/// `key = value` lines; '#' starts a comment.
inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::size_t eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    require(eq != std::string::npos,
            "config: " + path + " line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      std::size_t a = s.find_first_not_of(" \t\r");
      std::size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    try {
      apply_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail("config: " + path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

/// JZ_<KEY> with dots mapped to underscores, e.g. JZ_CURRICULUM_M1.
inline std::string env_name_for(const std::string& key) {
  std::string name = "JZ_";
  for (char c : key) name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

inline void apply_env_overrides(RunConfig& cfg) {
  for (const std::string& key : config_keys()) {
    const char* v = std::getenv(env_name_for(key).c_str());
    if (v) apply_config_value(cfg, key, v);
  }
}

}  // namespace jz
