#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "jz/rng.hpp"
#include "jz/tensor.hpp"

namespace jz {

using NodeId = int;
using GradMap = std::map<std::string, Tensor>;

inline real gelu_scalar(real x) {
  const real c1 = real(std::sqrt(2.0 / std::numbers::pi));
  const real c2 = real(0.044715);
  return real(0.5) * x * (real(1) + std::tanh(c1 * (x + c2 * x * x * x)));
}

/**
 * Reverse-mode autodiff tape.
 *
 * A tape records one forward computation as an append-only list of nodes;
 * backward() walks the list in reverse, so creation order is the topological
 * order. Parameters are registered by name and cached, which means two uses
 * of the same parameter (e.g. the tied embedding matrix feeding both the
 * input lookup and the output projection) share one leaf and their gradient
 * contributions accumulate naturally.
 *
 * All values are owned by the tape; a tape lives for one forward/backward
 * pass (one training step, or one decode step during generation).
 */
class Tape {
 public:
  /// Data leaf: no gradient is ever propagated into it.
  NodeId input(Tensor v) { return push(std::move(v), {}, nullptr, false); }

  /// Parameter leaf, cached by name so repeated lookups alias one node.
  NodeId param(const std::string& name, const Tensor& v) {
    auto it = param_ids_.find(name);
    if (it != param_ids_.end()) return it->second;
    NodeId id = push(v, {}, nullptr, true);
    param_ids_.emplace(name, id);
    return id;
  }

  const Tensor& value(NodeId id) const { return nodes_[id].value; }

  /// Gradient of the last backward() w.r.t. node `id`; zeros if untouched.
  Tensor grad(NodeId id) const {
    const Node& n = nodes_[id];
    return n.has_grad ? n.grad : Tensor::zeros(n.value.shape);
  }

  /// name -> gradient for every registered parameter (zeros if unused).
  GradMap param_grads() const {
    GradMap out;
    for (const auto& [name, id] : param_ids_) out.emplace(name, grad(id));
    return out;
  }

  // -- ops ------------------------------------------------------------------

  NodeId matmul(NodeId a, NodeId b) {
    Tensor c = matmul_nn(value(a), value(b));
    return push(std::move(c), {a, b}, [a, b](Tape& t, NodeId self) {
      const Tensor& g = t.nodes_[self].grad;
      if (t.wants(a)) matmul_nt_acc(g, t.value(b), t.grad_acc(a));          // dA = G B^T
      if (t.wants(b)) matmul_tn_acc(t.value(a), g, t.grad_acc(b));          // dB = A^T G
    });
  }

  /// A * B^T, used for attention scores and the tied output projections.
  NodeId matmul_t(NodeId a, NodeId b) {
    Tensor c = matmul_nt(value(a), value(b));
    return push(std::move(c), {a, b}, [a, b](Tape& t, NodeId self) {
      const Tensor& g = t.nodes_[self].grad;
      if (t.wants(a)) matmul_nn_acc(g, t.value(b), t.grad_acc(a));          // dA = G B
      if (t.wants(b)) matmul_tn_acc(g, t.value(a), t.grad_acc(b));          // dB = G^T A
    });
  }

  NodeId add(NodeId a, NodeId b) {
    require(value(a).same_shape(value(b)), "add: shape mismatch");
    Tensor c = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += vb.data[i];
    return push(std::move(c), {a, b}, [a, b](Tape& t, NodeId self) {
      const Tensor& g = t.nodes_[self].grad;
      for (NodeId p : {a, b}) {
        if (!t.wants(p)) continue;
        Tensor& d = t.grad_acc(p);
        for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
      }
    });
  }

  /// rows(a) + bias broadcast over rows.
  NodeId add_row(NodeId a, NodeId bias) {
    const Tensor& va = value(a);
    const Tensor& vb = value(bias);
    require(va.rank() == 2 && vb.size() == va.shape[1], "add_row: shape mismatch");
    Tensor c = va;
    for (std::size_t i = 0; i < c.shape[0]; ++i) {
      real* row = c.rowptr(i);
      for (std::size_t j = 0; j < c.shape[1]; ++j) row[j] += vb.data[j];
    }
    return push(std::move(c), {a, bias}, [a, bias](Tape& t, NodeId self) {
      const Tensor& g = t.nodes_[self].grad;
      if (t.wants(a)) {
        Tensor& d = t.grad_acc(a);
        for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
      }
      if (t.wants(bias)) {
        Tensor& d = t.grad_acc(bias);
        for (std::size_t i = 0; i < g.shape[0]; ++i) {
          const real* row = g.rowptr(i);
          for (std::size_t j = 0; j < g.shape[1]; ++j) d.data[j] += row[j];
        }
      }
    });
  }

  NodeId scale(NodeId a, real c) {
    Tensor v = value(a);
    for (auto& x : v.data) x *= c;
    return push(std::move(v), {a}, [a, c](Tape& t, NodeId self) {
      if (!t.wants(a)) return;
      const Tensor& g = t.nodes_[self].grad;
      Tensor& d = t.grad_acc(a);
      for (std::size_t i = 0; i < g.size(); ++i) d.data[i] += c * g.data[i];
    });
  }

  NodeId slice_cols(NodeId a, std::size_t start, std::size_t len) {
    const Tensor& va = value(a);
    require(va.rank() == 2 && start + len <= va.shape[1], "slice_cols: out of range");
    Tensor c({va.shape[0], len});
    for (std::size_t i = 0; i < va.shape[0]; ++i)
      for (std::size_t j = 0; j < len; ++j) c.at(i, j) = va.at(i, start + j);
    return push(std::move(c), {a}, [a, start, len](Tape& t, NodeId self) {
      if (!t.wants(a)) return;
      const Tensor& g = t.nodes_[self].grad;
      Tensor& d = t.grad_acc(a);
      for (std::size_t i = 0; i < g.shape[0]; ++i)
        for (std::size_t j = 0; j < len; ++j) d.at(i, start + j) += g.at(i, j);
    });
  }

  NodeId slice_rows(NodeId a, std::size_t start, std::size_t len) {
    const Tensor& va = value(a);
    require(va.rank() == 2 && start + len <= va.shape[0], "slice_rows: out of range");
    Tensor c({len, va.shape[1]});
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < va.shape[1]; ++j) c.at(i, j) = va.at(start + i, j);
    return push(std::move(c), {a}, [a, start, len](Tape& t, NodeId self) {
      if (!t.wants(a)) return;
      const Tensor& g = t.nodes_[self].grad;
      Tensor& d = t.grad_acc(a);
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j < g.shape[1]; ++j) d.at(start + i, j) += g.at(i, j);
    });
  }

  NodeId concat_cols(const std::vector<NodeId>& parts) {
    require(!parts.empty(), "concat_cols: empty");
    std::size_t rows = value(parts[0]).shape[0], total = 0;
    for (NodeId p : parts) total += value(p).shape[1];
    Tensor c({rows, total});
    std::size_t off = 0;
    for (NodeId p : parts) {
      const Tensor& vp = value(p);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < vp.shape[1]; ++j) c.at(i, off + j) = vp.at(i, j);
      off += vp.shape[1];
    }
    return push(std::move(c), parts, [parts](Tape& t, NodeId self) {
      const Tensor& g = t.nodes_[self].grad;
      std::size_t off = 0;
      for (NodeId p : parts) {
        std::size_t w = t.value(p).shape[1];
        if (t.wants(p)) {
          Tensor& d = t.grad_acc(p);
          for (std::size_t i = 0; i < g.shape[0]; ++i)
            for (std::size_t j = 0; j < w; ++j) d.at(i, j) += g.at(i, off + j);
        }
        off += w;
      }
    });
  }

  /**
   * Row softmax with optional causal masking. For causal=true row i is a
   * softmax over columns [0, i]; forbidden columns are never read, so
   * outputs at earlier rows are bit-identical under any change to later
   * inputs (the generation-decoder causality guarantee rests on this).
   */
  NodeId softmax_rows(NodeId a, bool causal = false) {
    const Tensor& va = value(a);
    require(va.rank() == 2, "softmax_rows: need matrix");
    Tensor c({va.shape[0], va.shape[1]});
    for (std::size_t i = 0; i < va.shape[0]; ++i) {
      std::size_t w = causal ? std::min(i + 1, va.shape[1]) : va.shape[1];
      const real* in = va.rowptr(i);
      real* out = c.rowptr(i);
      real m = in[0];
      for (std::size_t j = 1; j < w; ++j) m = std::max(m, in[j]);
      real sum = 0;
      for (std::size_t j = 0; j < w; ++j) {
        out[j] = std::exp(in[j] - m);
        sum += out[j];
      }
      for (std::size_t j = 0; j < w; ++j) out[j] /= sum;
    }
    return push(std::move(c), {a}, [a, causal](Tape& t, NodeId self) {
      if (!t.wants(a)) return;
      const Tensor& y = t.value(self);
      const Tensor& g = t.nodes_[self].grad;
      Tensor& d = t.grad_acc(a);
      for (std::size_t i = 0; i < y.shape[0]; ++i) {
        std::size_t w = causal ? std::min(i + 1, y.shape[1]) : y.shape[1];
        const real* yr = y.rowptr(i);
        const real* gr = g.rowptr(i);
        real dot = 0;
        for (std::size_t j = 0; j < w; ++j) dot += yr[j] * gr[j];
        real* dr = d.rowptr(i);
        for (std::size_t j = 0; j < w; ++j) dr[j] += yr[j] * (gr[j] - dot);
      }
    });
  }

  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, real eps = real(1e-5)) {
    const Tensor& vx = value(x);
    require(vx.rank() == 2, "layer_norm: need matrix");
    const std::size_t k = vx.shape[1];
    require(value(gain).size() == k && value(bias).size() == k, "layer_norm: affine shape");
    Tensor c({vx.shape[0], k});
    const Tensor& vg = value(gain);
    const Tensor& vb = value(bias);
    for (std::size_t i = 0; i < vx.shape[0]; ++i) {
      const real* in = vx.rowptr(i);
      real* out = c.rowptr(i);
      real mu = 0;
      for (std::size_t j = 0; j < k; ++j) mu += in[j];
      mu /= real(k);
      real var = 0;
      for (std::size_t j = 0; j < k; ++j) var += (in[j] - mu) * (in[j] - mu);
      var /= real(k);
      real inv = real(1) / std::sqrt(var + eps);
      for (std::size_t j = 0; j < k; ++j) out[j] = vg.data[j] * ((in[j] - mu) * inv) + vb.data[j];
    }
    return push(std::move(c), {x, gain, bias}, [x, gain, bias, eps](Tape& t, NodeId self) {
      const Tensor& vx = t.value(x);
      const Tensor& vg = t.value(gain);
      const Tensor& g = t.nodes_[self].grad;
      const std::size_t k = vx.shape[1];
      for (std::size_t i = 0; i < vx.shape[0]; ++i) {
        const real* in = vx.rowptr(i);
        const real* gr = g.rowptr(i);
        real mu = 0;
        for (std::size_t j = 0; j < k; ++j) mu += in[j];
        mu /= real(k);
        real var = 0;
        for (std::size_t j = 0; j < k; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= real(k);
        real inv = real(1) / std::sqrt(var + eps);
        real mean_gh = 0, mean_ghx = 0;
        for (std::size_t j = 0; j < k; ++j) {
          real xh = (in[j] - mu) * inv;
          real gh = gr[j] * vg.data[j];
          mean_gh += gh;
          mean_ghx += gh * xh;
        }
        mean_gh /= real(k);
        mean_ghx /= real(k);
        if (t.wants(x)) {
          real* dx = t.grad_acc(x).rowptr(i);
          for (std::size_t j = 0; j < k; ++j) {
            real xh = (in[j] - mu) * inv;
            real gh = gr[j] * vg.data[j];
            dx[j] += inv * (gh - mean_gh - xh * mean_ghx);
          }
        }
        if (t.wants(gain)) {
          Tensor& dg = t.grad_acc(gain);
          for (std::size_t j = 0; j < k; ++j) dg.data[j] += gr[j] * ((in[j] - mu) * inv);
        }
        if (t.wants(bias)) {
          Tensor& db = t.grad_acc(bias);
          for (std::size_t j = 0; j < k; ++j) db.data[j] += gr[j];
        }
      }
    });
  }

  /// GELU, tanh approximation.
  NodeId gelu(NodeId a) {
    Tensor c = value(a);
    for (auto& v : c.data) v = gelu_scalar(v);
    return push(std::move(c), {a}, [a](Tape& t, NodeId self) {
      if (!t.wants(a)) return;
      const real c1 = real(std::sqrt(2.0 / std::numbers::pi));
      const real c2 = real(0.044715);
      const Tensor& vx = t.value(a);
      const Tensor& g = t.nodes_[self].grad;
      Tensor& d = t.grad_acc(a);
      for (std::size_t i = 0; i < vx.size(); ++i) {
        real x = vx.data[i];
        real u = c1 * (x + c2 * x * x * x);
        real th = std::tanh(u);
        real sech2 = real(1) - th * th;
        real dy = real(0.5) * (real(1) + th) + real(0.5) * x * sech2 * c1 * (real(1) + 3 * c2 * x * x);
        d.data[i] += g.data[i] * dy;
      }
    });
  }

  /// Row gather: out[i] = table[ids[i]]. Backward scatter-adds in index order.
  NodeId embed(NodeId table, std::vector<int> ids) {
    const Tensor& vt = value(table);
    require(vt.rank() == 2, "embed: table must be 2-D");
    Tensor c({ids.size(), vt.shape[1]});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < vt.shape[0], "embed: id out of range");
      const real* row = vt.rowptr(static_cast<std::size_t>(ids[i]));
      real* out = c.rowptr(i);
      for (std::size_t j = 0; j < vt.shape[1]; ++j) out[j] = row[j];
    }
    return push(std::move(c), {table}, [table, ids = std::move(ids)](Tape& t, NodeId self) {
      if (!t.wants(table)) return;
      const Tensor& g = t.nodes_[self].grad;
      Tensor& d = t.grad_acc(table);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        real* row = d.rowptr(static_cast<std::size_t>(ids[i]));
        const real* gr = g.rowptr(i);
        for (std::size_t j = 0; j < g.shape[1]; ++j) row[j] += gr[j];
      }
    });
  }

  /**
   * Mean token cross-entropy: mean over rows with active[i] of
   * -log softmax(logits[i])[targets[i]]. Rows with active[i]=false are
   * excluded from both the mean and the gradient.
   */
  NodeId cross_entropy(NodeId logits, std::vector<int> targets, std::vector<char> active) {
    const Tensor& vl = value(logits);
    require(vl.rank() == 2 && targets.size() == vl.shape[0] && active.size() == vl.shape[0],
            "cross_entropy: shape mismatch");
    std::size_t n_active = 0;
    real loss = 0;
    for (std::size_t i = 0; i < vl.shape[0]; ++i) {
      if (!active[i]) continue;
      require(targets[i] >= 0 && static_cast<std::size_t>(targets[i]) < vl.shape[1],
              "cross_entropy: target out of range");
      const real* row = vl.rowptr(i);
      real m = row[0];
      for (std::size_t j = 1; j < vl.shape[1]; ++j) m = std::max(m, row[j]);
      real sum = 0;
      for (std::size_t j = 0; j < vl.shape[1]; ++j) sum += std::exp(row[j] - m);
      loss += (m + std::log(sum)) - row[static_cast<std::size_t>(targets[i])];
      ++n_active;
    }
    require(n_active > 0, "cross_entropy: no active positions");
    loss /= real(n_active);
    return push(Tensor::scalar(loss), {logits},
                [logits, targets = std::move(targets), active = std::move(active),
                 n_active](Tape& t, NodeId self) {
                  if (!t.wants(logits)) return;
                  const real g = t.nodes_[self].grad.data[0] / real(n_active);
                  const Tensor& vl = t.value(logits);
                  Tensor& d = t.grad_acc(logits);
                  for (std::size_t i = 0; i < vl.shape[0]; ++i) {
                    if (!active[i]) continue;
                    const real* row = vl.rowptr(i);
                    real* dr = d.rowptr(i);
                    real m = row[0];
                    for (std::size_t j = 1; j < vl.shape[1]; ++j) m = std::max(m, row[j]);
                    real sum = 0;
                    for (std::size_t j = 0; j < vl.shape[1]; ++j) sum += std::exp(row[j] - m);
                    for (std::size_t j = 0; j < vl.shape[1]; ++j)
                      dr[j] += g * (std::exp(row[j] - m) / sum);
                    dr[static_cast<std::size_t>(targets[i])] -= g;
                  }
                });
  }

  /// Numerically stable binary logistic loss on a scalar score.
  NodeId logistic_loss(NodeId score, real label01) {
    const Tensor& vs = value(score);
    require(vs.size() == 1, "logistic_loss: score must be scalar");
    real s = vs.data[0];
    real loss = std::max(s, real(0)) - s * label01 + std::log1p(std::exp(-std::abs(s)));
    return push(Tensor::scalar(loss), {score}, [score, label01](Tape& t, NodeId self) {
      if (!t.wants(score)) return;
      real s = t.value(score).data[0];
      real sig = real(1) / (real(1) + std::exp(-s));
      t.grad_acc(score).data[0] += t.nodes_[self].grad.data[0] * (sig - label01);
    });
  }

  /// Weighted sum of scalar nodes; the batch/loss aggregator.
  NodeId sum_scaled(const std::vector<NodeId>& parts, const std::vector<real>& coeffs) {
    require(parts.size() == coeffs.size() && !parts.empty(), "sum_scaled: size mismatch");
    real v = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) v += coeffs[i] * value(parts[i]).data[0];
    return push(Tensor::scalar(v), parts, [parts, coeffs](Tape& t, NodeId self) {
      const real g = t.nodes_[self].grad.data[0];
      for (std::size_t i = 0; i < parts.size(); ++i)
        if (t.wants(parts[i])) t.grad_acc(parts[i]).data[0] += coeffs[i] * g;
    });
  }

  /// Inverted dropout; the mask is drawn at build time from `rng`.
  NodeId dropout(NodeId a, real rate, Rng& rng) {
    if (rate <= 0) return a;
    require(rate < 1, "dropout: rate must be < 1");
    const Tensor& va = value(a);
    std::vector<char> keep(va.size());
    const real inv = real(1) / (real(1) - rate);
    Tensor c = va;
    for (std::size_t i = 0; i < c.size(); ++i) {
      keep[i] = rng.uniform() >= rate;
      c.data[i] = keep[i] ? c.data[i] * inv : real(0);
    }
    return push(std::move(c), {a}, [a, keep = std::move(keep), inv](Tape& t, NodeId self) {
      if (!t.wants(a)) return;
      const Tensor& g = t.nodes_[self].grad;
      Tensor& d = t.grad_acc(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (keep[i]) d.data[i] += g.data[i] * inv;
    });
  }

  // --------------------------------------------------------------------------

  /// Reverse pass from a scalar root. Only ancestors of the root run.
  void backward(NodeId root) {
    require(value(root).size() == 1, "backward: root must be scalar");
    grad_acc(root).data[0] = 1;
    for (NodeId i = root; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.has_grad && n.back) n.back(*this, i);
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::function<void(Tape&, NodeId)> back;
  };

  bool wants(NodeId id) const { return nodes_[id].requires_grad; }

  Tensor& grad_acc(NodeId id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor::zeros(n.value.shape);
      n.has_grad = true;
    }
    return n.grad;
  }

  NodeId push(Tensor v, const std::vector<NodeId>& parents,
              std::function<void(Tape&, NodeId)> back, bool is_param = false) {
    Node n;
    n.value = std::move(v);
    n.back = std::move(back);
    n.requires_grad = is_param;
    for (NodeId p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, NodeId> param_ids_;
};

inline std::vector<int> iota_ids(std::size_t n, int start = 0) {
  std::vector<int> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + static_cast<int>(i);
  return v;
}

}  // namespace jz
