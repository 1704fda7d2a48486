// SPDX-License-Identifier: Apache-2.0

#include "ngt/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ngt {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

}  // namespace

void validate_optim(const OptimConfig& cfg) {
  require(cfg.lr0 > 0.0, "optim config: lr0 must be > 0");
  require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0, "optim config: beta1 must be in [0, 1)");
  require(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0, "optim config: beta2 must be in [0, 1)");
  require(cfg.weight_decay >= 0.0, "optim config: weight_decay must be >= 0");
  require(cfg.eps > 0.0, "optim config: eps must be > 0");
  require(cfg.total_steps >= 1, "optim config: total_steps must be >= 1");
}

double cosine_lr(int64_t step, const OptimConfig& cfg) {
  require(step >= 0, "cosine_lr: step must be >= 0");
  require(cfg.total_steps >= 1, "cosine_lr: total_steps must be >= 1");
  if (step >= cfg.total_steps) return 0.0;
  double frac = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return cfg.lr0 * 0.5 * (1.0 + std::cos(M_PI * frac));
}

OptimState init_optim_state(const ParamSet& params) {
  OptimState state;
  for (const std::string& name : params.names()) {
    state.m.emplace(name, Tensor::zeros(params.at(name).shape));
    state.v.emplace(name, Tensor::zeros(params.at(name).shape));
  }
  return state;
}

void adamw_step(ParamSet& params, const ad::Gradients& grads, OptimState& state,
                const OptimConfig& cfg) {
  validate_optim(cfg);
  double lr = cosine_lr(state.t, cfg);
  state.t += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  for (const auto& [name, grad] : grads) {
    require(params.has(name), "adamw_step: gradient for unknown parameter " + name);
    Tensor& w = params.at(name);
    require(grad.shape == w.shape,
            "adamw_step: gradient shape mismatch for " + name + ": got " +
                shape_str(grad.shape) + ", parameter is " + shape_str(w.shape));
    auto mit = state.m.find(name);
    auto vit = state.v.find(name);
    require(mit != state.m.end() && vit != state.v.end(),
            "adamw_step: optimizer state missing for " + name);
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (size_t i = 0; i < w.data.size(); ++i) {
      double g = grad.data[i];
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
      double m_hat = m.data[i] / bc1;
      double v_hat = v.data[i] / bc2;
      w.data[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) +
                         cfg.weight_decay * w.data[i]);
    }
  }
}

}  // namespace ngt
