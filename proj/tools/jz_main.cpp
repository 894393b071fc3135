// Command-line entry point: preprocess | pretrain | finetune | eval | generate.
// Configuration precedence: defaults < --config file < JZ_* environment
// variables < command-line flags. Errors leave as JSON on stderr, exit 1.

#include <exception>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jz/jz.hpp"

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;   // config key, see jz::config_keys()
  bool boolean;
  const char* help;
};

const std::vector<FlagSpec>& flag_table() {
  static const std::vector<FlagSpec> table = {
      {"--corpus", "corpus", false, "corpus JSONL path"},
      {"--vocab", "vocab", false, "vocabulary file (one token per line)"},
      {"--out-dir", "out_dir", false, "output directory"},
      {"--seed", "seed", false, "global random seed"},
      {"--init-from", "init_from", false, "checkpoint directory to start from"},
      {"--data", "data", false, "task dataset JSONL"},
      {"--stats-out", "stats_out", false, "training trace JSONL path"},
      {"--report-out", "report_out", false, "eval report JSON path"},
      {"--task", "task", false, "task name (KPC QRC QAM SQR QAR MCQ BFQ CAG BAG)"},
      {"--num-labels", "num_labels", false, "label count for classification tasks"},
      {"--synthetic", "synthetic", false, "generate N synthetic problems instead of loading"},
      {"--vocab-max", "vocab_max", false, "vocabulary size cap"},
      {"--input", "input", false, "problem statement for generate"},
      {"--emit-corruptions", "emit_corruptions", true, "dump corruption examples (preprocess)"},
      {"--emit-tasks", "emit_tasks", true, "write synthetic task fixtures (preprocess)"},
      {"--dump-filled", "dump_filled", true, "dump solution-checking fills (pretrain)"},
      {"--m1", "curriculum.m1", false, "steps of the basic course"},
      {"--m2", "curriculum.m2", false, "steps of the logic-recovering course"},
      {"--m3", "curriculum.m3", false, "steps of the solution-checking course"},
      {"--batch-size", "curriculum.batch_size", false, "pre-training batch size"},
      {"--gamma", "curriculum.gamma", false, "fraction of each batch on U-decoder objectives"},
      {"--reverse-courses", "curriculum.reverse_courses", true, "run courses 3-2-1"},
      {"--multitask", "curriculum.multitask", true, "all tasks jointly, no curriculum"},
      {"--ssr-no-statement", "curriculum.ssr_no_statement", true,
       "condition SSR/SFR on the shuffled solution only"},
      {"--self-check", "curriculum.self_check", true, "decoders also correct their own fills"},
      {"--lr-reset-per-course", "curriculum.lr_reset_per_course", true,
       "restart the LR schedule at each course"},
      {"--bernoulli-masking", "curriculum.bernoulli_masking", true,
       "independent per-span masking instead of the fixed 15% budget"},
      {"--lr", "optimizer.learning_rate", false, "base learning rate"},
      {"--warmup", "optimizer.warmup_steps", false, "warmup steps"},
      {"--total-steps", "optimizer.total_steps", false, "schedule length (default m1+m2+m3)"},
      {"--weight-decay", "optimizer.weight_decay", false, "decoupled weight decay"},
      {"--dim", "model.dim", false, "embedding width"},
      {"--heads", "model.heads", false, "attention heads"},
      {"--ffn-dim", "model.ffn_dim", false, "feed-forward width"},
      {"--enc-layers", "model.enc_layers", false, "encoder layers"},
      {"--u-layers", "model.u_layers", false, "understanding-decoder layers"},
      {"--g-layers", "model.g_layers", false, "generation-decoder layers"},
      {"--max-len", "model.max_len", false, "maximum sequence length"},
      {"--dropout", "model.dropout", false, "dropout rate (0 keeps gradient checks exact)"},
      {"--ft-steps", "finetune.steps", false, "fine-tuning steps"},
      {"--ft-batch-size", "finetune.batch_size", false, "fine-tuning batch size"},
      {"--ft-lr", "finetune.lr", false, "fine-tuning learning rate (default 3e-5 / 5e-5)"},
      {"--max-out", "finetune.max_out", false, "generation cap in tokens"},
      {"--kpc-multilabel", "finetune.kpc_multilabel", true, "sigmoid multi-label KPC head"},
      {"--mcq-classify", "finetune.mcq_classify", true, "4-way classification head for MCQ"},
  };
  return table;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curriculum pre-training pipeline for mathematical-text language models"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  for (const char* name : {"preprocess", "pretrain", "finetune", "eval", "generate"}) {
    CLI::App* cmd = app.add_subcommand(name);
    cmd->add_option("--config", config_path, "key = value configuration file")->type_name("PATH");
    for (const FlagSpec& f : flag_table()) {
      std::string key = f.key;
      if (f.boolean) {
        cmd->add_flag_function(
            f.flag, [&overrides, key](std::int64_t) { overrides.emplace_back(key, "true"); },
            f.help);
      } else {
        cmd->add_option_function<std::string>(
               f.flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
               f.help)
            ->type_name("VALUE");
      }
    }
  }

  CLI11_PARSE(app, argc, argv);

  try {
    jz::RunConfig cfg;
    if (!config_path.empty()) jz::load_config_file(cfg, config_path);
    jz::apply_env_overrides(cfg);
    for (const auto& [key, value] : overrides) jz::apply_config_value(cfg, key, value);
    cfg.command = app.get_subcommands().front()->get_name();
    return jz::run_command(cfg);
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 1;
  }
}
