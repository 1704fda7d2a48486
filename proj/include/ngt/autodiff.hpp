// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ngt/tensor.hpp"

namespace ngt::ad {

using NodeId = int32_t;

enum class OpKind {
  Leaf,
  MatMul,
  Bmm,
  Add,
  AddBias,
  Hadamard,
  Scale,
  Sigmoid,
  Tanh,
  Gelu,
  SoftmaxLast,
  LayerNorm,
  Dropout,
  Reshape,
  Permute,
  Slice,
  GatherRows,
  SumAll,
  MeanAll,
  BceWithLogits,
  SoftmaxXent,
};

// d(loss)/d(param) for every named leaf the loss reaches; nothing else.
using Gradients = std::map<std::string, Tensor>;

struct Node {
  OpKind op = OpKind::Leaf;
  std::vector<NodeId> inputs;
  Tensor value;
  Tensor grad;               // empty until backward touches the node
  bool requires_grad = false;
  std::string name;          // leaves only
  double scalar = 0.0;       // scale factor, layer_norm eps, dropout rate
  Tensor aux;                // dropout mask, bce targets
  std::vector<int64_t> i64s; // labels, gather indices, reshape dims, slice args
  std::vector<int> axes;     // permute order
};

// Recorded forward tape. Build ops through the members; every call validates
// shapes eagerly and caches the op's output, so the tape can be re-run with
// perturbed leaves (recompute) while dropout masks and sampled indices stay
// frozen.
class Graph {
 public:
  NodeId leaf(Tensor value, std::string name, bool requires_grad = true);
  NodeId constant(Tensor value) { return leaf(std::move(value), "", false); }

  NodeId matmul(NodeId a, NodeId b);
  NodeId bmm(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId scale(NodeId x, double c);
  NodeId sigmoid(NodeId x);
  NodeId tanh(NodeId x);
  NodeId gelu(NodeId x);
  NodeId softmax_last(NodeId x);
  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps);
  // Identity when train is false or rate is zero (no node recorded, no draws).
  NodeId dropout(NodeId x, double rate, bool train, Rng& rng);
  NodeId reshape(NodeId x, std::vector<int64_t> new_shape);
  NodeId permute(NodeId x, std::vector<int> axes);
  NodeId slice(NodeId x, int axis, int64_t start, int64_t len);
  NodeId gather_rows(NodeId table, std::vector<int64_t> idx);
  NodeId sum_all(NodeId x);
  NodeId mean_all(NodeId x);
  // Mean over examples of max(z,0) - z*t + log1p(exp(-|z|)).
  NodeId bce_with_logits(NodeId logits, Tensor targets);
  // logits [B, C], labels in [0, C); mean over examples of logsumexp - z[label].
  NodeId softmax_xent(NodeId logits, std::vector<int64_t> labels);

  const Tensor& value(NodeId id) const { return node(id).value; }
  const Tensor& grad(NodeId id) const;
  const Node& node(NodeId id) const { return nodes_.at(static_cast<size_t>(id)); }
  int64_t size() const { return static_cast<int64_t>(nodes_.size()); }

  // Replace a leaf's value (shape must match), then recompute() to refresh
  // every downstream cached output. Aux state (masks, indices) is reused.
  void set_leaf(NodeId id, const Tensor& value);
  double leaf_element(NodeId id, int64_t i) const;
  void poke_leaf(NodeId id, int64_t i, double v);
  void recompute();

  // Reverse sweep from a scalar loss. Fills node grads and returns the map
  // for named leaves that were reached.
  Gradients backward(NodeId loss);

  bool has_train_dropout() const;
  std::vector<NodeId> named_leaves() const;

 private:
  Node& node(NodeId id) { return nodes_.at(static_cast<size_t>(id)); }
  NodeId push(Node n);
  void compute(Node& n);
  void accumulate(NodeId id, const Tensor& g);

  std::vector<Node> nodes_;
};

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps = 1e-5);

struct GradCheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-4;
  int64_t max_coords_per_param = 64;
  uint64_t sample_seed = 0;
  bool freeze_dropout_masks = true;  // false on a stochastic graph is an error
};

struct ParamCheck {
  std::string name;
  double max_rel_err = 0.0;
  int64_t coords = 0;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_coord = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  int64_t coords_checked = 0;
  std::vector<ParamCheck> per_param;
};

// Central differences against backward() on every named leaf, sampling at
// most max_coords_per_param coordinates per tensor (seeded).
GradCheckReport grad_check(Graph& g, NodeId loss, const GradCheckOptions& opts = {});

}  // namespace ngt::ad
