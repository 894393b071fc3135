#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "jz/jz.hpp"

using namespace jz;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("jz_cmd_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

RunConfig tiny_pretrain_config(const TempDir& dir, const std::string& out) {
  RunConfig cfg;
  cfg.corpus_path = dir.sub("corpus.jsonl");
  cfg.vocab_path = dir.sub("vocab.txt");
  cfg.out_dir = dir.sub(out);
  cfg.seed = 7;
  cfg.model.dim = 16;
  cfg.model.heads = 2;
  cfg.model.ffn_dim = 32;
  cfg.model.enc_layers = 1;
  cfg.model.u_layers = 1;
  cfg.model.g_layers = 1;
  cfg.model.max_len = 96;
  cfg.curriculum.m1 = 2;
  cfg.curriculum.m2 = 2;
  cfg.curriculum.m3 = 1;
  cfg.curriculum.batch_size = 4;
  cfg.curriculum.optimizer.learning_rate = real(3e-4);
  cfg.curriculum.optimizer.warmup_steps = 2;
  cfg.curriculum.optimizer.total_steps = 0;  // filled from m1+m2+m3
  return cfg;
}

}  // namespace

TEST_CASE("preprocess writes corpus, vocab, tokens and optional dumps") {
  TempDir dir;
  RunConfig cfg;
  cfg.synthetic_count = 6;
  cfg.seed = 11;
  cfg.out_dir = dir.sub("out");
  cfg.emit_corruptions = true;
  cfg.emit_tasks = true;
  REQUIRE(cmd_preprocess(cfg) == 0);
  REQUIRE(std::filesystem::exists(dir.path / "out" / "corpus.jsonl"));
  REQUIRE(std::filesystem::exists(dir.path / "out" / "vocab.txt"));
  REQUIRE(std::filesystem::exists(dir.path / "out" / "tokens.jsonl"));
  REQUIRE(std::filesystem::exists(dir.path / "out" / "corruptions.jsonl"));
  REQUIRE(std::filesystem::exists(dir.path / "out" / "tasks" / "KPC.train.jsonl"));
  REQUIRE(std::filesystem::exists(dir.path / "out" / "tasks" / "BAG.test.jsonl"));

  // four corruption flavors per record, well-formed fields
  std::ifstream dump(dir.path / "out" / "corruptions.jsonl");
  std::string line;
  std::size_t lines = 0;
  std::set<std::string> kinds;
  while (std::getline(dump, line)) {
    nlohmann::json j = nlohmann::json::parse(line);
    kinds.insert(j.at("kind").get<std::string>());
    REQUIRE(j.contains("input"));
    REQUIRE(j.contains("target"));
    REQUIRE(j.contains("masked_positions"));
    REQUIRE(j.contains("permutation"));
    REQUIRE(j.at("input").size() == j.at("target").size());
    ++lines;
  }
  REQUIRE(lines == 24);
  REQUIRE(kinds == std::set<std::string>{"mlm", "dae", "ssr", "sfr"});

  // the whole command is deterministic
  RunConfig again = cfg;
  again.out_dir = dir.sub("out2");
  cmd_preprocess(again);
  REQUIRE(slurp(dir.path / "out" / "corpus.jsonl") == slurp(dir.path / "out2" / "corpus.jsonl"));
  REQUIRE(slurp(dir.path / "out" / "vocab.txt") == slurp(dir.path / "out2" / "vocab.txt"));
  REQUIRE(slurp(dir.path / "out" / "corruptions.jsonl") ==
          slurp(dir.path / "out2" / "corruptions.jsonl"));
}

TEST_CASE("pretrain emits schedule-conforming stats and a loadable checkpoint") {
  TempDir dir;
  {
    RunConfig pre;
    pre.synthetic_count = 8;
    pre.seed = 7;
    pre.out_dir = dir.path.string();
    cmd_preprocess(pre);
  }
  RunConfig cfg = tiny_pretrain_config(dir, "run");
  REQUIRE(cmd_pretrain(cfg) == 0);

  std::ifstream stats(dir.path / "run" / "stats.jsonl");
  std::vector<int> courses;
  std::string line;
  while (std::getline(stats, line))
    courses.push_back(nlohmann::json::parse(line).at("course").get<int>());
  REQUIRE(courses == std::vector<int>{1, 1, 2, 2, 3});

  Checkpoint ck = load_checkpoint((dir.path / "run" / "checkpoint").string());
  REQUIRE(ck.trained_steps == 5);
  REQUIRE(ck.params.config.dim == 16);
  REQUIRE_FALSE(ck.opt.m.empty());

  // identical RunConfig -> byte-identical stats
  RunConfig rerun = tiny_pretrain_config(dir, "run2");
  cmd_pretrain(rerun);
  REQUIRE(slurp(dir.path / "run" / "stats.jsonl") == slurp(dir.path / "run2" / "stats.jsonl"));
}

TEST_CASE("pretrain resumes from a checkpoint with identical continuation") {
  TempDir dir;
  {
    RunConfig pre;
    pre.synthetic_count = 8;
    pre.seed = 7;
    pre.out_dir = dir.path.string();
    cmd_preprocess(pre);
  }
  RunConfig full = tiny_pretrain_config(dir, "full");
  cmd_pretrain(full);

  RunConfig part = tiny_pretrain_config(dir, "part");
  part.curriculum.m3 = 0;  // stop after 4 steps
  // an interrupted run keeps the full schedule length so the rates line up
  part.curriculum.optimizer.total_steps = 5;
  cmd_pretrain(part);
  RunConfig rest = tiny_pretrain_config(dir, "rest");
  rest.init_from = (dir.path / "part" / "checkpoint").string();
  cmd_pretrain(rest);

  Checkpoint a = load_checkpoint((dir.path / "full" / "checkpoint").string());
  Checkpoint b = load_checkpoint((dir.path / "rest" / "checkpoint").string());
  REQUIRE(a.trained_steps == b.trained_steps);
  for (const auto& [name, t] : a.params.tensors) {
    const Tensor& u = b.params.tensors.at(name);
    REQUIRE(std::memcmp(t.data.data(), u.data.data(), t.size() * sizeof(real)) == 0);
  }
}

TEST_CASE("finetune reaches full training accuracy on an 8-example fixture") {
  TempDir dir;
  {
    RunConfig pre;
    pre.synthetic_count = 12;
    pre.seed = 3;
    pre.out_dir = dir.path.string();
    cmd_preprocess(pre);
  }
  save_task_data(make_synthetic_task("KPC", 8, 5), dir.sub("kpc.jsonl"));

  RunConfig cfg;
  cfg.vocab_path = dir.sub("vocab.txt");
  cfg.data_path = dir.sub("kpc.jsonl");
  cfg.task = "KPC";
  cfg.out_dir = dir.sub("ft");
  cfg.seed = 5;
  cfg.model.dim = 32;
  cfg.model.heads = 2;
  cfg.model.ffn_dim = 64;
  cfg.model.enc_layers = 1;
  cfg.model.u_layers = 1;
  cfg.model.g_layers = 1;
  cfg.model.max_len = 96;
  cfg.finetune_steps = 150;
  cfg.finetune_batch = 8;
  cfg.finetune_lr = real(3e-3);
  REQUIRE(cmd_finetune(cfg) == 0);

  RunConfig ev = cfg;
  ev.init_from = dir.sub("ft/checkpoint");
  ev.report_out = dir.sub("report.json");
  REQUIRE(cmd_eval(ev) == 0);
  nlohmann::json report = nlohmann::json::parse(slurp(dir.path / "report.json"));
  REQUIRE(report.at("task") == "KPC");
  REQUIRE(report.at("count") == 8);
  REQUIRE(report.at("metrics").at("accuracy").get<double>() == 1.0);
  REQUIRE(report.at("metrics").size() == 2);

  // identical inputs give an identical report
  RunConfig ev2 = ev;
  ev2.report_out = dir.sub("report2.json");
  cmd_eval(ev2);
  REQUIRE(slurp(dir.path / "report.json") == slurp(dir.path / "report2.json"));
}

TEST_CASE("finetune defaults the learning rate by head type") {
  // understanding tasks default to 3e-5; generation tasks to 5e-5
  TempDir dir;
  {
    RunConfig pre;
    pre.synthetic_count = 8;
    pre.seed = 3;
    pre.out_dir = dir.path.string();
    cmd_preprocess(pre);
  }
  save_task_data(make_synthetic_task("QAM", 4, 6), dir.sub("qam.jsonl"));
  save_task_data(make_synthetic_task("BAG", 4, 6), dir.sub("bag.jsonl"));

  auto run = [&](const std::string& task, const std::string& data, const std::string& out) {
    RunConfig cfg;
    cfg.vocab_path = dir.sub("vocab.txt");
    cfg.data_path = dir.sub(data);
    cfg.task = task;
    cfg.out_dir = dir.sub(out);
    cfg.seed = 5;
    cfg.model.dim = 16;
    cfg.model.heads = 2;
    cfg.model.ffn_dim = 32;
    cfg.model.enc_layers = 1;
    cfg.model.u_layers = 1;
    cfg.model.g_layers = 1;
    cfg.model.max_len = 96;
    cfg.finetune_steps = 10;
    cfg.finetune_batch = 2;
    cmd_finetune(cfg);
    std::string line = slurp(dir.path / out / "stats.jsonl");
    return nlohmann::json::parse(line.substr(0, line.find('\n')));
  };
  nlohmann::json qam = run("QAM", "qam.jsonl", "qam_out");
  nlohmann::json bag = run("BAG", "bag.jsonl", "bag_out");
  // step 1 completes the one-step warmup, so the logged rate is the base rate
  REQUIRE(qam.at("lr").get<double>() == 3e-5);
  REQUIRE(bag.at("lr").get<double>() == 5e-5);
}

TEST_CASE("generate decodes greedily from a checkpoint") {
  TempDir dir;
  {
    RunConfig pre;
    pre.synthetic_count = 8;
    pre.seed = 7;
    pre.out_dir = dir.path.string();
    cmd_preprocess(pre);
  }
  RunConfig cfg = tiny_pretrain_config(dir, "run");
  cmd_pretrain(cfg);
  RunConfig gen;
  gen.vocab_path = dir.sub("vocab.txt");
  gen.init_from = dir.sub("run/checkpoint");
  gen.input_text = "solve for $ x $ : $ 3 x + 4 = 10 $ .";
  gen.max_out = 8;
  REQUIRE(cmd_generate(gen) == 0);
}

TEST_CASE("commands report missing inputs as errors") {
  RunConfig cfg;
  cfg.command = "pretrain";
  REQUIRE_THROWS_AS(run_command(cfg), Error);
  cfg.command = "nonsense";
  REQUIRE_THROWS_AS(run_command(cfg), Error);
  RunConfig ft;
  ft.command = "finetune";
  REQUIRE_THROWS_WITH(run_command(ft), Catch::Matchers::ContainsSubstring("--task"));
}

TEST_CASE("config file, environment and flag precedence") {
  TempDir dir;
  std::ofstream file(dir.sub("run.cfg"));
  file << "# comment line\n";
  file << "seed = 99\n";
  file << "curriculum.m1 = 5\n";
  file << "model.dim = 24\n";
  file.close();

  RunConfig cfg;
  load_config_file(cfg, dir.sub("run.cfg"));
  REQUIRE(cfg.seed == 99);
  REQUIRE(cfg.curriculum.m1 == 5);
  REQUIRE(cfg.model.dim == 24);

  ::setenv("JZ_CURRICULUM_M1", "7", 1);
  ::setenv("JZ_MODEL_DIM", "32", 1);
  apply_env_overrides(cfg);
  ::unsetenv("JZ_CURRICULUM_M1");
  ::unsetenv("JZ_MODEL_DIM");
  REQUIRE(cfg.curriculum.m1 == 7);
  REQUIRE(cfg.model.dim == 32);

  apply_config_value(cfg, "model.dim", "48");  // flags come last and win
  REQUIRE(cfg.model.dim == 48);

  REQUIRE_THROWS_AS(apply_config_value(cfg, "unknown.key", "1"), Error);
  REQUIRE_THROWS_AS(load_config_file(cfg, dir.sub("missing.cfg")), Error);
}

TEST_CASE("environment names map keys predictably") {
  REQUIRE(env_name_for("curriculum.m1") == "JZ_CURRICULUM_M1");
  REQUIRE(env_name_for("seed") == "JZ_SEED");
  REQUIRE(env_name_for("optimizer.learning_rate") == "JZ_OPTIMIZER_LEARNING_RATE");
}

TEST_CASE("dump-filled emits fills during the checking course") {
  TempDir dir;
  {
    RunConfig pre;
    pre.synthetic_count = 6;
    pre.seed = 13;
    pre.out_dir = dir.path.string();
    cmd_preprocess(pre);
  }
  RunConfig cfg = tiny_pretrain_config(dir, "run");
  cfg.seed = 13;
  cfg.dump_filled = true;
  cmd_pretrain(cfg);
  std::ifstream fills(dir.path / "run" / "filled.jsonl");
  std::string line;
  std::size_t count = 0;
  while (std::getline(fills, line)) {
    nlohmann::json j = nlohmann::json::parse(line);
    REQUIRE((j.at("source") == "U" || j.at("source") == "G"));
    REQUIRE(j.at("ids").size() == j.at("original").size());
    ++count;
  }
  REQUIRE(count == cfg.curriculum.batch_size * cfg.curriculum.m3);
}
