// SPDX-License-Identifier: Apache-2.0

#include "ngt/gating.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ngt/model.hpp"
#include "ngt/rng.hpp"

namespace ngt {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

int64_t clamp_position(int64_t p, int64_t num_layers) {
  return std::max<int64_t>(1, std::min(p, num_layers - 1));
}

}  // namespace

std::string variant_name(GatingVariant v) {
  switch (v) {
    case GatingVariant::NoGatingBlock:
      return "no_gating_block";
    case GatingVariant::NeuromodulatedGating:
      return "neuromodulated";
    case GatingVariant::NonNeuromodulatedGating:
      return "non_neuromodulated";
  }
  fail("variant_name: unknown variant");
}

GatingVariant variant_from_name(const std::string& name) {
  if (name == "no_gating_block") return GatingVariant::NoGatingBlock;
  if (name == "neuromodulated") return GatingVariant::NeuromodulatedGating;
  if (name == "non_neuromodulated") return GatingVariant::NonNeuromodulatedGating;
  fail("unknown gating variant '" + name +
       "' (expected no_gating_block, neuromodulated, or non_neuromodulated)");
}

void validate_gating(const GatingConfig& gating, int64_t num_layers) {
  require(gating.gb_depth >= 1, "gating config: gb_depth must be >= 1");
  if (gating.variant == GatingVariant::NoGatingBlock) {
    require(gating.positions.empty(),
            "gating config: no_gating_block takes no positions");
    return;
  }
  require(!gating.positions.empty(), "gating config: gated variants need positions");
  int64_t prev = 0;
  for (int64_t p : gating.positions) {
    require(p >= 1 && p <= num_layers, "gating config: position " + std::to_string(p) +
                                           " outside [1, " + std::to_string(num_layers) +
                                           "]");
    require(p > prev, "gating config: positions must be strictly increasing");
    prev = p;
  }
}

int64_t sweep_start_position(int64_t num_layers) {
  require(num_layers >= 2, "sweep positions need at least 2 layers");
  return clamp_position(std::llround(3.0 * static_cast<double>(num_layers) / 24.0),
                        num_layers);
}

int64_t sweep_end_position(int64_t num_layers) {
  require(num_layers >= 2, "sweep positions need at least 2 layers");
  return clamp_position(std::llround(21.0 * static_cast<double>(num_layers) / 24.0),
                        num_layers);
}

Tensor apply_gate(const Tensor& x, const Tensor& gate) {
  require(x.same_shape(gate), "apply_gate: gate " + shape_str(gate.shape) +
                                  " does not match input " + shape_str(x.shape));
  return hadamard(gate, x);
}

ad::NodeId gating_block_graph(ad::Graph& g, const ParamLeaves& leaves,
                              const ModelConfig& cfg, const GatingConfig& gating,
                              int64_t position, ad::NodeId x, ad::NodeId attn_mask,
                              int64_t batch, int64_t seq_len,
                              const ForwardOptions& opts, Rng& drop_rng,
                              ad::NodeId* pre_sigmoid) {
  ad::NodeId h = x;
  for (int64_t j = 1; j <= gating.gb_depth; ++j) {
    std::string prefix =
        "gb.p" + std::to_string(position) + "." + std::to_string(j) + ".";
    h = encoder_layer_graph(g, leaves, prefix, cfg, h, attn_mask, batch, seq_len, opts,
                            drop_rng);
  }
  if (pre_sigmoid) *pre_sigmoid = h;
  return g.sigmoid(h);
}

ad::NodeId forward_with_gating_graph(ad::Graph& g, const ParamLeaves& leaves,
                                     const ModelConfig& cfg, const GatingConfig& gating,
                                     ad::NodeId x0, ad::NodeId attn_mask, int64_t batch,
                                     int64_t seq_len, const ForwardOptions& opts,
                                     Rng& drop_rng) {
  validate_gating(gating, cfg.num_layers);
  if (opts.gate_override) {
    require(gating.variant == GatingVariant::NeuromodulatedGating,
            "forward: gate_override applies only to neuromodulated gating");
    require(opts.gate_override->shape ==
                std::vector<int64_t>{batch, seq_len, cfg.hidden},
            "forward: gate_override shape " + shape_str(opts.gate_override->shape) +
                " must be [batch, seq, hidden]");
  }

  ad::NodeId x = x0;
  size_t next_gate = 0;
  for (int64_t k = 1; k <= cfg.num_layers; ++k) {
    x = encoder_layer_graph(g, leaves, "enc." + std::to_string(k) + ".", cfg, x,
                            attn_mask, batch, seq_len, opts, drop_rng);
    if (gating.variant == GatingVariant::NoGatingBlock) continue;
    if (next_gate >= gating.positions.size() || gating.positions[next_gate] != k) {
      continue;
    }
    ++next_gate;

    if (opts.gate_override) {
      ad::NodeId gate = g.constant(
          reshape(*opts.gate_override, {batch * seq_len, cfg.hidden}));
      if (opts.trace) opts.trace->push_back({k, *opts.gate_override});
      x = g.hadamard(gate, x);
      continue;
    }

    ad::NodeId pre = -1;
    ad::NodeId gate = gating_block_graph(g, leaves, cfg, gating, k, x, attn_mask,
                                         batch, seq_len, opts, drop_rng, &pre);
    if (gating.variant == GatingVariant::NeuromodulatedGating) {
      if (opts.trace) {
        opts.trace->push_back(
            {k, reshape(g.value(gate), {batch, seq_len, cfg.hidden})});
      }
      x = g.hadamard(gate, x);
    } else {
      ad::NodeId out = gating.gb_sigmoid ? gate : pre;
      if (opts.trace) {
        opts.trace->push_back(
            {k, reshape(g.value(out), {batch, seq_len, cfg.hidden})});
      }
      x = out;
    }
  }
  return x;
}

Tensor gating_block_forward(const ParamSet& params, const ModelConfig& cfg,
                            const GatingConfig& gating, int64_t position,
                            const Tensor& x, const std::vector<double>& mask) {
  validate_model(cfg);
  require(x.rank() == 3 && x.shape[2] == cfg.hidden,
          "gating_block_forward: input " + shape_str(x.shape) +
              " must be [batch, seq, hidden=" + std::to_string(cfg.hidden) + "]");
  int64_t B = x.shape[0], T = x.shape[1];
  require(mask.size() == static_cast<size_t>(B * T),
          "gating_block_forward: mask length does not match batch*seq");

  ad::Graph g;
  ParamLeaves leaves = add_param_leaves(g, params);
  ad::NodeId xn = g.constant(reshape(x, {B * T, cfg.hidden}));
  ad::NodeId m = g.constant(attention_mask_tensor(mask, B, cfg.heads, T));
  ForwardOptions opts;
  Rng drop_rng = Rng::stream(0, "dropout");
  ad::NodeId gate = gating_block_graph(g, leaves, cfg, gating, position, xn, m, B, T,
                                       opts, drop_rng, nullptr);
  return reshape(g.value(gate), {B, T, cfg.hidden});
}

}  // namespace ngt
