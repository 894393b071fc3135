#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jz/autodiff.hpp"
#include "jz/rng.hpp"
#include "jz/tensor.hpp"

namespace jz {

using ParamMap = std::map<std::string, Tensor>;

struct OptimizerConfig {
  real learning_rate = real(3e-5);
  std::int64_t warmup_steps = 5000;
  std::int64_t total_steps = 300000;
  real weight_decay = real(0.01);
  real beta1 = real(0.9);
  real beta2 = real(0.999);
  real epsilon = real(1e-8);

  void validate() const {
    require(learning_rate > 0 && beta1 > 0 && beta2 > 0 && epsilon > 0,
            "optimizer: rates must be positive");
    require(warmup_steps >= 0 && total_steps >= 0 && warmup_steps <= total_steps,
            "optimizer: need 0 <= warmup_steps <= total_steps");
  }
};

/// Linear warmup to the base rate, then linear decay to zero at total_steps.
inline real lr_schedule(std::int64_t step, const OptimizerConfig& c) {
  if (step > c.total_steps) return 0;
  if (c.warmup_steps > 0 && step <= c.warmup_steps)
    return c.learning_rate * real(step) / real(c.warmup_steps);
  if (c.total_steps <= c.warmup_steps) return c.learning_rate;
  return c.learning_rate * real(c.total_steps - step) / real(c.total_steps - c.warmup_steps);
}

/// First and second moment estimates, keyed like the parameter map.
struct AdamState {
  ParamMap m;
  ParamMap v;
};

/**
 * One AdamW update. `step` is 1-based (drives bias correction); `lr` is the
 * already-scheduled rate for this step. Decoupled weight decay is applied
 * after the adaptive update as p -= lr * wd * p. Parameters without an entry
 * in `grads` are treated as having zero gradient (their momentum still
 * decays and weight decay still applies).
 */
inline void adamw_step(ParamMap& params, const GradMap& grads, AdamState& state,
                       const OptimizerConfig& cfg, std::int64_t step, real lr) {
  require(step >= 1, "adamw_step: step must be >= 1");
  const real bc1 = real(1) - std::pow(cfg.beta1, real(step));
  const real bc2 = real(1) - std::pow(cfg.beta2, real(step));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    const Tensor* g = git == grads.end() ? nullptr : &git->second;
    if (g) {
      require(g->same_shape(p), "adamw_step: gradient shape mismatch for " + name);
      if (!g->all_finite()) fail("adamw_step: non-finite gradient in " + name);
    }
    Tensor& m = state.m.try_emplace(name, Tensor::zeros(p.shape)).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor::zeros(p.shape)).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const real gi = g ? g->data[i] : real(0);
      m.data[i] = cfg.beta1 * m.data[i] + (real(1) - cfg.beta1) * gi;
      v.data[i] = cfg.beta2 * v.data[i] + (real(1) - cfg.beta2) * gi * gi;
      const real mhat = m.data[i] / bc1;
      const real vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
      p.data[i] -= lr * cfg.weight_decay * p.data[i];
    }
  }
}

inline void adamw_step(ParamMap& params, const GradMap& grads, AdamState& state,
                       const OptimizerConfig& cfg, std::int64_t step) {
  adamw_step(params, grads, state, cfg, step, cfg.learning_rate);
}

/**
 * Central-difference gradient check.
 *
 * Probes `probes` randomly chosen scalar coordinates of `params`, estimates
 * the derivative of `loss_fn` by central differences with step `h`, and
 * returns the maximum relative error against `analytic`. Coordinates where
 * both estimates are below 1e-6 are compared absolutely, so exact zeros
 * (untouched parameters) cost nothing.
 */
inline real finite_difference_check(const std::function<real(const ParamMap&)>& loss_fn,
                                    ParamMap params, const GradMap& analytic, int probes,
                                    real h = real(1e-5), std::uint64_t seed = 0xfd) {
  std::vector<std::string> names;
  std::size_t total = 0;
  for (const auto& [name, t] : params) {
    names.push_back(name);
    total += t.size();
  }
  require(total > 0, "finite_difference_check: no parameters");
  Rng rng(seed);
  real worst = 0;
  for (int probe = 0; probe < probes; ++probe) {
    std::size_t flat = rng.uniform_int(total);
    std::size_t ti = 0;
    while (flat >= params.at(names[ti]).size()) {
      flat -= params.at(names[ti]).size();
      ++ti;
    }
    const std::string& name = names[ti];
    Tensor& t = params.at(name);
    const real saved = t.data[flat];
    t.data[flat] = saved + h;
    const real up = loss_fn(params);
    t.data[flat] = saved - h;
    const real down = loss_fn(params);
    t.data[flat] = saved;
    const real fd = (up - down) / (2 * h);
    auto ait = analytic.find(name);
    const real an = ait == analytic.end() ? real(0) : ait->second.data[flat];
    const real tau = real(1e-6);
    real err;
    if (std::abs(fd) < tau && std::abs(an) < tau)
      err = std::abs(fd - an);
    else
      err = std::abs(fd - an) / std::max(std::abs(fd), tau);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace jz
