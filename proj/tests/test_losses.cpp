#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "jz/losses.hpp"

using namespace jz;
using Catch::Matchers::WithinAbs;

namespace {

struct Fixture {
  CorpusFile corpus = generate_synthetic_corpus(4, 61);
  Vocab vocab = build_vocab(corpus, 512);
  ModelParams params;

  Fixture() {
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.dim = 16;
    mc.heads = 2;
    mc.ffn_dim = 32;
    mc.enc_layers = 1;
    mc.u_layers = 1;
    mc.g_layers = 1;
    mc.max_len = 96;
    params = build_model(mc, 41);
  }

  /// Zeroed embeddings and heads force exactly uniform logits everywhere.
  ModelParams uniform_params() const {
    ModelParams p = params;
    for (auto& v : p.at("embed.tok").data) v = 0;
    for (auto& v : p.at("head.mlm.b").data) v = 0;
    for (auto& v : p.at("head.lm.b").data) v = 0;
    return p;
  }
};

}  // namespace

TEST_CASE_METHOD(Fixture, "mlm loss on a uniform-logit model is ln(vocab)") {
  ModelParams uni = uniform_params();
  CorruptedExample ex =
      make_masked_example(encode_pretrain(corpus.records[0], vocab), vocab, 3, Kind::MLM);
  REQUIRE_THAT(double(mlm_loss(uni, ex)), WithinAbs(std::log(double(vocab.size())), 1e-9));
}

TEST_CASE_METHOD(Fixture, "mlm loss ignores unmasked positions") {
  CorruptedExample ex =
      make_masked_example(encode_pretrain(corpus.records[0], vocab), vocab, 3, Kind::MLM);
  real base = mlm_loss(params, ex);
  // perturb the target at a position that was not selected
  std::size_t untouched = 0;
  while (std::find(ex.masked_positions.begin(), ex.masked_positions.end(), untouched) !=
         ex.masked_positions.end())
    ++untouched;
  CorruptedExample tweaked = ex;
  tweaked.target.ids[untouched] = tweaked.target.ids[untouched] == 5 ? 6 : 5;
  REQUIRE(mlm_loss(params, tweaked) == base);
}

TEST_CASE_METHOD(Fixture, "mlm loss contributes zero without masked positions") {
  CorruptedExample ex;
  ex.kind = Kind::MLM;
  ex.input = encode_pretrain(corpus.records[0], vocab);
  ex.target = ex.input;
  REQUIRE(mlm_loss(params, ex) == real(0));
}

TEST_CASE_METHOD(Fixture, "dae loss covers every target position") {
  CorruptedExample ex =
      make_masked_example(encode_pretrain(corpus.records[0], vocab), vocab, 5, Kind::DAE);
  real base = dae_loss(params, ex);
  // unlike MLM, perturbing any target token moves the loss
  CorruptedExample tweaked = ex;
  std::size_t pos = 2;
  tweaked.target.ids[pos] = tweaked.target.ids[pos] == 5 ? 6 : 5;
  REQUIRE(dae_loss(params, tweaked) != base);
  ModelParams uni = uniform_params();
  REQUIRE_THAT(double(dae_loss(uni, ex)), WithinAbs(std::log(double(vocab.size())), 1e-9));
}

TEST_CASE_METHOD(Fixture, "ssr and sfr report ln(vocab) at uniform logits") {
  ModelParams uni = uniform_params();
  CorruptedExample ssr = shuffle_sentences(corpus.records[1], vocab, 7);
  CorruptedExample sfr = shuffle_formulas(corpus.records[1], vocab, 8);
  REQUIRE_THAT(double(ssr_loss(uni, ssr)), WithinAbs(std::log(double(vocab.size())), 1e-9));
  REQUIRE_THAT(double(sfr_loss(uni, sfr)), WithinAbs(std::log(double(vocab.size())), 1e-9));
}

TEST_CASE_METHOD(Fixture, "identity SSR equals DAE with zero masking on the bare solution") {
  // one-sentence solution so the shuffle is the identity
  MathText mt;
  mt.id = "one";
  mt.statement = corpus.records[0].statement;
  mt.solution = {"the", "answer", "is", "$", "3", "$", "."};
  annotate(mt);
  CorruptedExample ssr_ex = shuffle_sentences(mt, vocab, 3);
  REQUIRE(ssr_ex.input.ids == ssr_ex.target.ids);

  // DAE over the same bare solution with nothing masked
  CorruptedExample dae_ex;
  dae_ex.kind = Kind::DAE;
  dae_ex.input = encode_wrapped(mt.solution, vocab);
  dae_ex.target = dae_ex.input;
  REQUIRE_THAT(double(ssr_loss(params, ssr_ex, /*include_statement=*/false)),
               WithinAbs(double(dae_loss(params, dae_ex)), 1e-12));
}

TEST_CASE_METHOD(Fixture, "statement conditioning changes the SSR loss") {
  CorruptedExample ex = shuffle_sentences(corpus.records[2], vocab, 9);
  REQUIRE(ssr_loss(params, ex, true) != ssr_loss(params, ex, false));
}

TEST_CASE_METHOD(Fixture, "losses differentiate: finite-difference agreement") {
  ModelConfig mc = params.config;
  mc.dim = 8;
  mc.heads = 2;
  mc.ffn_dim = 16;
  ModelParams small = build_model(mc, 43);
  CorruptedExample masked =
      make_masked_example(encode_pretrain(corpus.records[0], vocab), vocab, 11, Kind::MLM);
  CorruptedExample ssr_ex = shuffle_sentences(corpus.records[0], vocab, 12);

  auto check = [&](auto build) {
    Tape tape;
    ModelGraph g(tape, small);
    NodeId root = build(g);
    tape.backward(root);
    GradMap analytic = tape.param_grads();
    auto loss_fn = [&](const ParamMap& pm) {
      ModelParams probe;
      probe.config = small.config;
      probe.tensors = pm;
      Tape t2;
      ModelGraph g2(t2, probe);
      return t2.value(build(g2)).data[0];
    };
    return finite_difference_check(loss_fn, small.tensors, analytic, 20);
  };
  REQUIRE(double(check([&](ModelGraph& g) { return mlm_loss_node(g, masked); })) < 1e-4);
  REQUIRE(double(check([&](ModelGraph& g) { return dae_loss_node(g, masked); })) < 1e-4);
  REQUIRE(double(check([&](ModelGraph& g) { return ssr_loss_node(g, ssr_ex); })) < 1e-4);
}

TEST_CASE_METHOD(Fixture, "dae overfits a single example to near zero") {
  ModelConfig mc = params.config;
  mc.dim = 32;
  mc.ffn_dim = 64;
  ModelParams p = build_model(mc, 44);
  CorruptedExample ex =
      make_masked_example(encode_pretrain(corpus.records[0], vocab), vocab, 13, Kind::DAE);
  AdamState opt;
  OptimizerConfig oc;
  oc.learning_rate = real(3e-3);
  oc.warmup_steps = 10;
  oc.total_steps = 100000;
  for (int step = 1; step <= 400; ++step) {
    Tape tape;
    ModelGraph g(tape, p);
    NodeId loss = dae_loss_node(g, ex);
    tape.backward(loss);
    GradMap grads = tape.param_grads();
    for (const auto& [name, t] : p.tensors) grads.try_emplace(name, Tensor::zeros(t.shape));
    adamw_step(p.tensors, grads, opt, oc, step, lr_schedule(step, oc));
  }
  REQUIRE(double(dae_loss(p, ex)) < 0.01);
}
