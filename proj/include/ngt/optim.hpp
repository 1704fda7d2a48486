// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ngt/autodiff.hpp"
#include "ngt/model.hpp"

namespace ngt {

struct OptimConfig {
  double lr0 = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double eps = 1e-8;
  int64_t total_steps = 1;
};

void validate_optim(const OptimConfig& cfg);

// Cosine decay from lr0 at step 0 to exactly zero at total_steps; steps past
// the end stay at zero.
double cosine_lr(int64_t step, const OptimConfig& cfg);

// First/second moment accumulators plus the count of completed steps.
struct OptimState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  int64_t t = 0;
};

OptimState init_optim_state(const ParamSet& params);

// One AdamW update: bias-corrected Adam plus decoupled decay, both scaled by
// the cosine rate for the step being taken,
//   w <- w - lr_t * (m_hat / (sqrt(v_hat) + eps) + weight_decay * w).
// Every gradient entry must name a parameter of matching shape; all of them
// are decayed, layer norms and biases included.
void adamw_step(ParamSet& params, const ad::Gradients& grads, OptimState& state,
                const OptimConfig& cfg);

}  // namespace ngt
