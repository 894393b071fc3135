#pragma once

#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "jz/autodiff.hpp"
#include "jz/optim.hpp"
#include "jz/vocab.hpp"

namespace jz {

/**
 * Shared-encoder / dual-decoder transformer dimensions. The deep-encoder,
 * shallow-decoder asymmetry is the point of the architecture; the desk
 * default is 4/2/2 and the full-scale reference shape is 10/2/2.
 */
struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t dim = 128;      // embedding width k
  std::size_t heads = 4;
  std::size_t ffn_dim = 512;
  std::size_t enc_layers = 4;
  std::size_t u_layers = 2;
  std::size_t g_layers = 2;
  std::size_t max_len = 256;
  real dropout = 0;  // desk-scale default; nonzero breaks exact gradient checks

  void validate() const {
    require(vocab_size >= kReservedTokens.size(), "model config: vocab_size too small");
    require(dim >= 1 && heads >= 1 && dim % heads == 0, "model config: dim must divide by heads");
    require(enc_layers >= 1 && u_layers >= 1 && g_layers >= 1, "model config: layer counts >= 1");
    require(max_len >= 2, "model config: max_len must be >= 2");
    require(dropout >= 0 && dropout < 1, "model config: dropout in [0,1)");
  }

  nlohmann::json to_json() const {
    return {{"vocab_size", vocab_size}, {"dim", dim},           {"heads", heads},
            {"ffn_dim", ffn_dim},       {"enc_layers", enc_layers}, {"u_layers", u_layers},
            {"g_layers", g_layers},     {"max_len", max_len},   {"dropout", dropout}};
  }
  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.dim = j.at("dim").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    c.enc_layers = j.at("enc_layers").get<std::size_t>();
    c.u_layers = j.at("u_layers").get<std::size_t>();
    c.g_layers = j.at("g_layers").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.dropout = j.value("dropout", real(0));
    return c;
  }
};

enum class InitKind { Normal, Zero, One };

/// Name, shape and init rule of every core parameter, in a fixed order.
/// Fine-tune heads are appended separately by the task adapters.
inline std::vector<std::tuple<std::string, std::vector<std::size_t>, InitKind>> param_registry(
    const ModelConfig& c) {
  std::vector<std::tuple<std::string, std::vector<std::size_t>, InitKind>> reg;
  auto add = [&](std::string name, std::vector<std::size_t> shape, InitKind k) {
    reg.emplace_back(std::move(name), std::move(shape), k);
  };
  add("embed.tok", {c.vocab_size, c.dim}, InitKind::Normal);
  add("embed.pos", {c.max_len, c.dim}, InitKind::Normal);
  auto add_attn = [&](const std::string& p) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) add(p + "." + w, {c.dim, c.dim}, InitKind::Normal);
    for (const char* b : {"bq", "bk", "bv", "bo"}) add(p + "." + b, {c.dim}, InitKind::Zero);
  };
  auto add_norm = [&](const std::string& p) {
    add(p + ".g", {c.dim}, InitKind::One);
    add(p + ".b", {c.dim}, InitKind::Zero);
  };
  auto add_ffn = [&](const std::string& p) {
    add(p + ".w1", {c.dim, c.ffn_dim}, InitKind::Normal);
    add(p + ".b1", {c.ffn_dim}, InitKind::Zero);
    add(p + ".w2", {c.ffn_dim, c.dim}, InitKind::Normal);
    add(p + ".b2", {c.dim}, InitKind::Zero);
  };
  auto add_encoder_layer = [&](const std::string& p) {
    add_attn(p + ".attn");
    add_norm(p + ".norm1");
    add_ffn(p + ".ffn");
    add_norm(p + ".norm2");
  };
  for (std::size_t i = 0; i < c.enc_layers; ++i) add_encoder_layer("enc." + std::to_string(i));
  for (std::size_t i = 0; i < c.u_layers; ++i) add_encoder_layer("udec." + std::to_string(i));
  for (std::size_t i = 0; i < c.g_layers; ++i) {
    std::string p = "gdec." + std::to_string(i);
    add_attn(p + ".self");
    add_norm(p + ".norm1");
    add_attn(p + ".cross");
    add_norm(p + ".norm2");
    add_ffn(p + ".ffn");
    add_norm(p + ".norm3");
  }
  // Both output heads tie the token embedding matrix; only biases remain.
  add("head.mlm.b", {c.vocab_size}, InitKind::Zero);
  add("head.lm.b", {c.vocab_size}, InitKind::Zero);
  return reg;
}

struct ModelParams {
  ModelConfig config;
  ParamMap tensors;

  Tensor& at(const std::string& name) {
    auto it = tensors.find(name);
    require(it != tensors.end(), "model: unknown parameter " + name);
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    require(it != tensors.end(), "model: unknown parameter " + name);
    return it->second;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors) n += t.size();
    return n;
  }
};

/// Fresh parameters: truncated normal (std 0.02) for weights, zeros for
/// biases, ones for norm gains. Deterministic under seed.
inline ModelParams build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  std::size_t idx = 0;
  for (const auto& [name, shape, kind] : param_registry(config)) {
    Tensor t(shape);
    Rng rng(Rng::mix(seed, idx++));
    switch (kind) {
      case InitKind::Normal:
        for (auto& v : t.data) v = real(rng.truncated_normal(0.02));
        break;
      case InitKind::Zero:
        break;
      case InitKind::One:
        for (auto& v : t.data) v = real(1);
        break;
    }
    p.tensors.emplace(name, std::move(t));
  }
  return p;
}

/**
 * Builds the forward graph of one model invocation on a tape. One instance
 * per tape; parameter leaves are shared through the tape's name cache, so
 * several sequences (a whole batch) can be built through one ModelGraph and
 * their losses summed before a single backward pass.
 */
class ModelGraph {
 public:
  ModelGraph(Tape& tape, const ModelParams& params, Rng* dropout_rng = nullptr)
      : t_(tape), p_(params), drop_rng_(dropout_rng) {}

  /// Embedding sum + L bidirectional layers; post-norm residuals.
  NodeId encode_ids(const std::vector<int>& ids) {
    require(ids.size() >= 1, "encode: empty input");
    require(ids.size() <= p_.config.max_len,
            "encode: input length " + std::to_string(ids.size()) + " exceeds max_len");
    NodeId x = embed_sum(ids);
    for (std::size_t i = 0; i < p_.config.enc_layers; ++i)
      x = encoder_layer(x, "enc." + std::to_string(i), x);
    return x;
  }

  /// Shallow bidirectional stack over the encoder states.
  NodeId u_states(NodeId enc) {
    NodeId x = enc;
    for (std::size_t i = 0; i < p_.config.u_layers; ++i)
      x = encoder_layer(x, "udec." + std::to_string(i), x);
    return x;
  }

  /// Per-position vocabulary logits through the tied embedding matrix.
  NodeId u_logits(NodeId u_out) {
    return t_.add_row(t_.matmul_t(u_out, param("embed.tok")), param("head.mlm.b"));
  }

  /// U-decoder state at position 0; the input must begin with [CLS].
  NodeId pooled_cls(NodeId u_out, const std::vector<int>& ids) {
    require(!ids.empty() && ids[0] == kCls, "pooled_cls: input must begin with [CLS]");
    return t_.slice_rows(u_out, 0, 1);
  }

  /// Teacher-forced generation stack: causal self-attention, cross-attention
  /// over the encoder states, feed-forward; post-norm residuals.
  NodeId g_states(NodeId enc, const std::vector<int>& prefix_ids) {
    require(prefix_ids.size() >= 1, "g_states: empty prefix");
    require(prefix_ids.size() <= p_.config.max_len, "g_states: prefix exceeds max_len");
    NodeId x = embed_sum(prefix_ids);
    for (std::size_t i = 0; i < p_.config.g_layers; ++i) {
      std::string pre = "gdec." + std::to_string(i);
      NodeId a = attention(x, x, pre + ".self", /*causal=*/true);
      x = t_.layer_norm(t_.add(x, a), param(pre + ".norm1.g"), param(pre + ".norm1.b"));
      NodeId c = attention(x, enc, pre + ".cross", /*causal=*/false);
      x = t_.layer_norm(t_.add(x, c), param(pre + ".norm2.g"), param(pre + ".norm2.b"));
      NodeId f = ffn(x, pre + ".ffn");
      x = t_.layer_norm(t_.add(x, f), param(pre + ".norm3.g"), param(pre + ".norm3.b"));
    }
    return x;
  }

  NodeId g_logits(NodeId g_out) {
    return t_.add_row(t_.matmul_t(g_out, param("embed.tok")), param("head.lm.b"));
  }

  Tape& tape() { return t_; }
  const ModelParams& params() const { return p_; }

 private:
  NodeId param(const std::string& name) { return t_.param(name, p_.at(name)); }

  NodeId maybe_dropout(NodeId x) {
    if (drop_rng_ && p_.config.dropout > 0) return t_.dropout(x, p_.config.dropout, *drop_rng_);
    return x;
  }

  NodeId embed_sum(const std::vector<int>& ids) {
    NodeId tok = t_.embed(param("embed.tok"), ids);
    NodeId pos = t_.embed(param("embed.pos"), iota_ids(ids.size()));
    return maybe_dropout(t_.add(tok, pos));
  }

  NodeId linear(NodeId x, const std::string& w, const std::string& b) {
    return t_.add_row(t_.matmul(x, param(w)), param(b));
  }

  NodeId attention(NodeId x, NodeId kv, const std::string& pre, bool causal) {
    const std::size_t heads = p_.config.heads;
    const std::size_t dh = p_.config.dim / heads;
    NodeId q = linear(x, pre + ".wq", pre + ".bq");
    NodeId k = linear(kv, pre + ".wk", pre + ".bk");
    NodeId v = linear(kv, pre + ".wv", pre + ".bv");
    std::vector<NodeId> outs;
    outs.reserve(heads);
    const real inv_sqrt = real(1) / std::sqrt(real(dh));
    for (std::size_t h = 0; h < heads; ++h) {
      NodeId qh = t_.slice_cols(q, h * dh, dh);
      NodeId kh = t_.slice_cols(k, h * dh, dh);
      NodeId vh = t_.slice_cols(v, h * dh, dh);
      NodeId scores = t_.scale(t_.matmul_t(qh, kh), inv_sqrt);
      NodeId probs = t_.softmax_rows(scores, causal);
      outs.push_back(t_.matmul(probs, vh));
    }
    NodeId merged = heads == 1 ? outs[0] : t_.concat_cols(outs);
    return maybe_dropout(linear(merged, pre + ".wo", pre + ".bo"));
  }

  NodeId ffn(NodeId x, const std::string& pre) {
    NodeId h = t_.gelu(linear(x, pre + ".w1", pre + ".b1"));
    return maybe_dropout(linear(h, pre + ".w2", pre + ".b2"));
  }

  NodeId encoder_layer(NodeId x, const std::string& pre, NodeId kv) {
    NodeId a = attention(x, kv, pre + ".attn", /*causal=*/false);
    x = t_.layer_norm(t_.add(x, a), param(pre + ".norm1.g"), param(pre + ".norm1.b"));
    NodeId f = ffn(x, pre + ".ffn");
    return t_.layer_norm(t_.add(x, f), param(pre + ".norm2.g"), param(pre + ".norm2.b"));
  }

  Tape& t_;
  const ModelParams& p_;
  Rng* drop_rng_;
};

// -- forward-only wrappers ---------------------------------------------------

/// Final-layer encoder states, n x k.
inline Tensor encode_hidden(const ModelParams& params, const std::vector<int>& ids) {
  Tape tape;
  ModelGraph g(tape, params);
  return tape.value(g.encode_ids(ids));
}

/// U-decoder per-position vocabulary logits, n x V.
inline Tensor u_decode_logits(const ModelParams& params, const std::vector<int>& ids) {
  Tape tape;
  ModelGraph g(tape, params);
  return tape.value(g.u_logits(g.u_states(g.encode_ids(ids))));
}

/// U-decoder [CLS] state, k.
inline Tensor pooled_cls(const ModelParams& params, const std::vector<int>& ids) {
  Tape tape;
  ModelGraph g(tape, params);
  Tensor row = tape.value(g.pooled_cls(g.u_states(g.encode_ids(ids)), ids));
  return Tensor({params.config.dim}, std::move(row.data));
}

/// Teacher-forced G-decoder logits for a target prefix, m x V.
inline Tensor g_decode_logits(const ModelParams& params, const std::vector<int>& enc_ids,
                              const std::vector<int>& target_prefix_ids) {
  Tape tape;
  ModelGraph g(tape, params);
  NodeId enc = g.encode_ids(enc_ids);
  return tape.value(g.g_logits(g.g_states(enc, target_prefix_ids)));
}

/// Greedy argmax over a logits row; ties go to the smallest id.
inline int argmax_row(const Tensor& logits, std::size_t row) {
  const real* r = logits.rowptr(row);
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.shape[1]; ++j)
    if (r[j] > r[best]) best = j;
  return static_cast<int>(best);
}

/**
 * Greedy decoding: argmax step by step until `eos` or `max_out` tokens.
 * The returned sequence excludes `bos` and `eos`. The encoder runs once;
 * decoder states are recomputed per step (correctness over speed).
 */
inline std::vector<int> generate_greedy(const ModelParams& params, const std::vector<int>& enc_ids,
                                        std::size_t max_out, int bos = kCls, int eos = kSep) {
  Tape tape;
  ModelGraph g(tape, params);
  NodeId enc = g.encode_ids(enc_ids);
  std::vector<int> prefix = {bos};
  std::vector<int> out;
  while (out.size() < max_out && prefix.size() < params.config.max_len) {
    const Tensor& logits = tape.value(g.g_logits(g.g_states(enc, prefix)));
    int next = argmax_row(logits, prefix.size() - 1);
    if (next == eos) break;
    out.push_back(next);
    prefix.push_back(next);
  }
  return out;
}

}  // namespace jz
