// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ngt/autodiff.hpp"
#include "ngt/gating.hpp"
#include "ngt/tensor.hpp"

namespace ngt {

struct ModelConfig {
  int64_t vocab_size = 0;
  int64_t max_positions = 512;
  int64_t type_vocab = 2;
  int64_t hidden = 0;
  int64_t num_layers = 0;
  int64_t heads = 0;
  int64_t intermediate = 0;
  double ln_eps = 1e-12;
  double dropout = 0.1;
  double init_std = 0.02;
  int64_t output_units = 1;
  bool has_pooler = true;
};

void validate_model(const ModelConfig& cfg);

// Named parameter tensors in a stable insertion order; the order fixes both
// the initialization draw sequence and the save-file layout.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return map_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }
  int64_t total_elements() const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> map_;
};

// Host parameters: embeddings, encoder layers enc.<k>. (1-based), optional
// pooler, head. Weights and embeddings draw Normal(0, init_std^2) from the
// "init.host" stream; layer-norm gammas start at 1, betas and biases at 0.
ParamSet init_host_params(const ModelConfig& cfg, uint64_t seed);

// Adds gb.p<position>.<depth>. layer tensors from the "init.gate" stream.
// No-op for NoGatingBlock.
void add_gating_params(ParamSet& params, const ModelConfig& cfg,
                       const GatingConfig& gating, uint64_t seed);

int64_t per_layer_param_count(int64_t hidden, int64_t intermediate);
int64_t param_count(const ModelConfig& cfg, const GatingConfig& gating);

// Versioned plain-text tensor file; round-trips doubles exactly.
void save_params(const ParamSet& params, const std::string& path);
ParamSet load_params(const std::string& path);

struct Batch {
  int64_t batch = 0;
  int64_t seq_len = 0;
  std::vector<int64_t> tokens;    // batch*seq_len, row-major
  std::vector<double> mask;       // 1 attend, 0 padding
  std::vector<int64_t> segments;  // sentence A/B ids
};

struct GateTrace {
  int64_t position = 0;
  Tensor value;  // [batch, seq_len, hidden]: what the block emitted there
};

struct ForwardOptions {
  bool train = false;
  uint64_t dropout_seed = 0;
  uint64_t dropout_step = 0;  // distinct masks per optimization step
  // Test hook: bypass the gating block and use this [batch, seq, hidden]
  // tensor as the gate at every position.
  const Tensor* gate_override = nullptr;
  std::vector<GateTrace>* trace = nullptr;
  std::vector<ad::NodeId>* attn_probs = nullptr;  // one node per layer
};

using ParamLeaves = std::map<std::string, ad::NodeId>;

ParamLeaves add_param_leaves(ad::Graph& g, const ParamSet& params);

// Additive attention mask: 0 where the key position is kept, -1e9 where it
// is padding, expanded to [batch*heads, seq, seq].
Tensor attention_mask_tensor(const std::vector<double>& keep, int64_t batch,
                             int64_t heads, int64_t seq_len);

// One post-layer-norm encoder layer (attention + FFN) on x of shape
// [batch*seq, hidden]; attn_mask is an additive [batch*heads, seq, seq]
// constant. Parameter tensors are looked up as <prefix>attn.q.w etc.
ad::NodeId encoder_layer_graph(ad::Graph& g, const ParamLeaves& leaves,
                               const std::string& prefix, const ModelConfig& cfg,
                               ad::NodeId x, ad::NodeId attn_mask, int64_t batch,
                               int64_t seq_len, const ForwardOptions& opts,
                               Rng& drop_rng);

// Gating-block stack at one position; pre_sigmoid receives the raw stack
// output node, and the returned node is sigmoid(stack).
ad::NodeId gating_block_graph(ad::Graph& g, const ParamLeaves& leaves,
                              const ModelConfig& cfg, const GatingConfig& gating,
                              int64_t position, ad::NodeId x, ad::NodeId attn_mask,
                              int64_t batch, int64_t seq_len,
                              const ForwardOptions& opts, Rng& drop_rng,
                              ad::NodeId* pre_sigmoid = nullptr);

// Runs the L host layers with gates applied per the config; returns the
// final hidden states [batch*seq, hidden].
ad::NodeId forward_with_gating_graph(ad::Graph& g, const ParamLeaves& leaves,
                                     const ModelConfig& cfg, const GatingConfig& gating,
                                     ad::NodeId x0, ad::NodeId attn_mask, int64_t batch,
                                     int64_t seq_len, const ForwardOptions& opts,
                                     Rng& drop_rng);

// Embeddings -> gated encoder stack -> CLS head. Returns the logits node
// ([batch, output_units]).
ad::NodeId model_forward_graph(ad::Graph& g, const ParamSet& params,
                               const ModelConfig& cfg, const GatingConfig& gating,
                               const Batch& batch, const ForwardOptions& opts);

Tensor model_forward(const ParamSet& params, const ModelConfig& cfg,
                     const GatingConfig& gating, const Batch& batch,
                     const ForwardOptions& opts = {});

// Eval-mode gating block on its own, for inspection: x is [batch, seq,
// hidden], mask is per-token keep flags (batch*seq). Returns the gate.
Tensor gating_block_forward(const ParamSet& params, const ModelConfig& cfg,
                            const GatingConfig& gating, int64_t position,
                            const Tensor& x, const std::vector<double>& mask);

}  // namespace ngt
