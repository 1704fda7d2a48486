// SPDX-License-Identifier: Apache-2.0

#include "ngt/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "ngt/rng.hpp"

namespace ngt::ad {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

double stable_bce_term(double z, double t) {
  return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

NodeId Graph::push(Node n) {
  for (NodeId in : n.inputs) {
    require(in >= 0 && in < size(), "graph: input node out of range");
    if (nodes_[static_cast<size_t>(in)].requires_grad) n.requires_grad = true;
  }
  nodes_.push_back(std::move(n));
  compute(nodes_.back());
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Tensor value, std::string name, bool requires_grad) {
  Node n;
  n.op = OpKind::Leaf;
  n.value = std::move(value);
  n.name = std::move(name);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::MatMul;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::bmm(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Bmm;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Add;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::add_bias(NodeId x, NodeId bias) {
  Node n;
  n.op = OpKind::AddBias;
  n.inputs = {x, bias};
  return push(std::move(n));
}

NodeId Graph::hadamard(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Hadamard;
  n.inputs = {a, b};
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double c) {
  Node n;
  n.op = OpKind::Scale;
  n.inputs = {x};
  n.scalar = c;
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
  Node n;
  n.op = OpKind::Sigmoid;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId x) {
  Node n;
  n.op = OpKind::Tanh;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::gelu(NodeId x) {
  Node n;
  n.op = OpKind::Gelu;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::softmax_last(NodeId x) {
  Node n;
  n.op = OpKind::SoftmaxLast;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps) {
  Node n;
  n.op = OpKind::LayerNorm;
  n.inputs = {x, gamma, beta};
  n.scalar = eps;
  return push(std::move(n));
}

NodeId Graph::dropout(NodeId x, double rate, bool train, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  Node n;
  n.op = OpKind::Dropout;
  n.inputs = {x};
  n.scalar = rate;
  n.aux = dropout_mask(node(x).value.shape, rate, rng);
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, std::vector<int64_t> new_shape) {
  Node n;
  n.op = OpKind::Reshape;
  n.inputs = {x};
  n.i64s = std::move(new_shape);
  return push(std::move(n));
}

NodeId Graph::permute(NodeId x, std::vector<int> axes) {
  Node n;
  n.op = OpKind::Permute;
  n.inputs = {x};
  n.axes = std::move(axes);
  return push(std::move(n));
}

NodeId Graph::slice(NodeId x, int axis, int64_t start, int64_t len) {
  Node n;
  n.op = OpKind::Slice;
  n.inputs = {x};
  n.i64s = {axis, start, len};
  return push(std::move(n));
}

NodeId Graph::gather_rows(NodeId table, std::vector<int64_t> idx) {
  Node n;
  n.op = OpKind::GatherRows;
  n.inputs = {table};
  n.i64s = std::move(idx);
  return push(std::move(n));
}

NodeId Graph::sum_all(NodeId x) {
  Node n;
  n.op = OpKind::SumAll;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::mean_all(NodeId x) {
  Node n;
  n.op = OpKind::MeanAll;
  n.inputs = {x};
  return push(std::move(n));
}

NodeId Graph::bce_with_logits(NodeId logits, Tensor targets) {
  require(node(logits).value.same_shape(targets),
          "bce_with_logits: targets " + shape_str(targets.shape) +
              " do not match logits " + shape_str(node(logits).value.shape));
  for (double t : targets.data) {
    require(t >= 0.0 && t <= 1.0, "bce_with_logits: target outside [0, 1]");
  }
  Node n;
  n.op = OpKind::BceWithLogits;
  n.inputs = {logits};
  n.aux = std::move(targets);
  return push(std::move(n));
}

NodeId Graph::softmax_xent(NodeId logits, std::vector<int64_t> labels) {
  const Tensor& z = node(logits).value;
  require(z.rank() == 2, "softmax_xent: logits must be [batch, classes], got " +
                             shape_str(z.shape));
  require(static_cast<int64_t>(labels.size()) == z.shape[0],
          "softmax_xent: label count " + std::to_string(labels.size()) +
              " does not match batch " + std::to_string(z.shape[0]));
  for (int64_t y : labels) {
    require(y >= 0 && y < z.shape[1], "softmax_xent: label out of range");
  }
  Node n;
  n.op = OpKind::SoftmaxXent;
  n.inputs = {logits};
  n.i64s = std::move(labels);
  return push(std::move(n));
}

void Graph::compute(Node& n) {
  auto in = [&](size_t i) -> const Tensor& {
    return nodes_[static_cast<size_t>(n.inputs[i])].value;
  };
  switch (n.op) {
    case OpKind::Leaf:
      break;
    case OpKind::MatMul:
      n.value = ngt::matmul(in(0), in(1));
      break;
    case OpKind::Bmm:
      n.value = ngt::bmm(in(0), in(1));
      break;
    case OpKind::Add:
      n.value = ngt::add(in(0), in(1));
      break;
    case OpKind::AddBias:
      n.value = ngt::add_bias(in(0), in(1));
      break;
    case OpKind::Hadamard:
      n.value = ngt::hadamard(in(0), in(1));
      break;
    case OpKind::Scale:
      n.value = ngt::scale(in(0), n.scalar);
      break;
    case OpKind::Sigmoid:
      n.value = ngt::sigmoid(in(0));
      break;
    case OpKind::Tanh:
      n.value = ngt::tanh(in(0));
      break;
    case OpKind::Gelu:
      n.value = ngt::gelu(in(0));
      break;
    case OpKind::SoftmaxLast:
      n.value = ngt::softmax(in(0), in(0).rank() - 1);
      break;
    case OpKind::LayerNorm:
      n.value = ngt::layer_norm(in(0), in(1), in(2), n.scalar);
      break;
    case OpKind::Dropout:
      n.value = ngt::hadamard(in(0), n.aux);
      break;
    case OpKind::Reshape:
      n.value = ngt::reshape(in(0), n.i64s);
      break;
    case OpKind::Permute:
      n.value = ngt::permute(in(0), n.axes);
      break;
    case OpKind::Slice:
      n.value = ngt::slice(in(0), static_cast<int>(n.i64s[0]), n.i64s[1], n.i64s[2]);
      break;
    case OpKind::GatherRows:
      n.value = ngt::gather_rows(in(0), n.i64s);
      break;
    case OpKind::SumAll:
      n.value = Tensor({1}, {ngt::sum(in(0))});
      break;
    case OpKind::MeanAll:
      n.value = Tensor({1}, {ngt::mean(in(0))});
      break;
    case OpKind::BceWithLogits: {
      const Tensor& z = in(0);
      double loss = 0.0;
      for (size_t i = 0; i < z.data.size(); ++i) {
        loss += stable_bce_term(z.data[i], n.aux.data[i]);
      }
      n.value = Tensor({1}, {loss / static_cast<double>(z.numel())});
      break;
    }
    case OpKind::SoftmaxXent: {
      const Tensor& z = in(0);
      int64_t B = z.shape[0], C = z.shape[1];
      double loss = 0.0;
      for (int64_t i = 0; i < B; ++i) {
        const double* row = z.data.data() + i * C;
        double m = row[0];
        for (int64_t j = 1; j < C; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < C; ++j) s += std::exp(row[j] - m);
        loss += m + std::log(s) - row[n.i64s[static_cast<size_t>(i)]];
      }
      n.value = Tensor({1}, {loss / static_cast<double>(B)});
      break;
    }
  }
}

const Tensor& Graph::grad(NodeId id) const { return node(id).grad; }

void Graph::set_leaf(NodeId id, const Tensor& value) {
  Node& n = node(id);
  require(n.op == OpKind::Leaf, "set_leaf: node is not a leaf");
  require(n.value.same_shape(value), "set_leaf: shape " + shape_str(value.shape) +
                                         " does not match " + shape_str(n.value.shape));
  n.value = value;
}

double Graph::leaf_element(NodeId id, int64_t i) const {
  const Node& n = node(id);
  require(n.op == OpKind::Leaf, "leaf_element: node is not a leaf");
  return n.value.data.at(static_cast<size_t>(i));
}

void Graph::poke_leaf(NodeId id, int64_t i, double v) {
  Node& n = node(id);
  require(n.op == OpKind::Leaf, "poke_leaf: node is not a leaf");
  n.value.data.at(static_cast<size_t>(i)) = v;
}

void Graph::recompute() {
  for (Node& n : nodes_) {
    if (n.op != OpKind::Leaf) compute(n);
  }
}

bool Graph::has_train_dropout() const {
  for (const Node& n : nodes_) {
    if (n.op == OpKind::Dropout) return true;
  }
  return false;
}

std::vector<NodeId> Graph::named_leaves() const {
  std::vector<NodeId> out;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == OpKind::Leaf && n.requires_grad && !n.name.empty()) {
      out.push_back(static_cast<NodeId>(i));
    }
  }
  return out;
}

void Graph::accumulate(NodeId id, const Tensor& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  require(n.value.same_shape(g), "backward: gradient shape " + shape_str(g.shape) +
                                     " does not match value " + shape_str(n.value.shape));
  if (n.grad.numel() == 0) {
    n.grad = g;
  } else {
    for (size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
  }
}

Gradients Graph::backward(NodeId loss) {
  require(loss >= 0 && loss < size(), "backward: loss node out of range");
  require(node(loss).value.numel() == 1,
          "backward: loss must be scalar, got " + shape_str(node(loss).value.shape));

  for (Node& n : nodes_) n.grad = Tensor();
  node(loss).grad = Tensor::ones(node(loss).value.shape);

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = node(id);
    if (n.grad.numel() == 0 || n.op == OpKind::Leaf) continue;
    const Tensor& G = n.grad;
    auto inv = [&](size_t i) -> const Tensor& {
      return nodes_[static_cast<size_t>(n.inputs[i])].value;
    };
    auto wants = [&](size_t i) {
      return nodes_[static_cast<size_t>(n.inputs[i])].requires_grad;
    };

    switch (n.op) {
      case OpKind::Leaf:
        break;
      case OpKind::MatMul: {
        if (wants(0)) accumulate(n.inputs[0], ngt::matmul(G, transpose2d(inv(1))));
        if (wants(1)) accumulate(n.inputs[1], ngt::matmul(transpose2d(inv(0)), G));
        break;
      }
      case OpKind::Bmm: {
        if (wants(0)) accumulate(n.inputs[0], ngt::bmm(G, ngt::permute(inv(1), {0, 2, 1})));
        if (wants(1)) accumulate(n.inputs[1], ngt::bmm(ngt::permute(inv(0), {0, 2, 1}), G));
        break;
      }
      case OpKind::Add:
        if (wants(0)) accumulate(n.inputs[0], G);
        if (wants(1)) accumulate(n.inputs[1], G);
        break;
      case OpKind::AddBias: {
        if (wants(0)) accumulate(n.inputs[0], G);
        if (wants(1)) {
          int64_t c = G.shape.back();
          int64_t rows = G.numel() / c;
          Tensor db = Tensor::zeros({c});
          for (int64_t r = 0; r < rows; ++r) {
            for (int64_t j = 0; j < c; ++j) db.data[static_cast<size_t>(j)] += G.data[static_cast<size_t>(r * c + j)];
          }
          accumulate(n.inputs[1], db);
        }
        break;
      }
      case OpKind::Hadamard:
        if (wants(0)) accumulate(n.inputs[0], ngt::hadamard(G, inv(1)));
        if (wants(1)) accumulate(n.inputs[1], ngt::hadamard(G, inv(0)));
        break;
      case OpKind::Scale:
        if (wants(0)) accumulate(n.inputs[0], ngt::scale(G, n.scalar));
        break;
      case OpKind::Sigmoid: {
        if (!wants(0)) break;
        Tensor dx = G;
        for (size_t i = 0; i < dx.data.size(); ++i) {
          double y = n.value.data[i];
          dx.data[i] *= y * (1.0 - y);
        }
        accumulate(n.inputs[0], dx);
        break;
      }
      case OpKind::Tanh: {
        if (!wants(0)) break;
        Tensor dx = G;
        for (size_t i = 0; i < dx.data.size(); ++i) {
          double y = n.value.data[i];
          dx.data[i] *= 1.0 - y * y;
        }
        accumulate(n.inputs[0], dx);
        break;
      }
      case OpKind::Gelu: {
        if (!wants(0)) break;
        Tensor dx = G;
        for (size_t i = 0; i < dx.data.size(); ++i) {
          double x = inv(0).data[i];
          double phi_big = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
          double phi_small = kInvSqrt2Pi * std::exp(-0.5 * x * x);
          dx.data[i] *= phi_big + x * phi_small;
        }
        accumulate(n.inputs[0], dx);
        break;
      }
      case OpKind::SoftmaxLast: {
        if (!wants(0)) break;
        int64_t c = n.value.shape.back();
        int64_t rows = n.value.numel() / c;
        Tensor dx = Tensor::zeros(n.value.shape);
        for (int64_t r = 0; r < rows; ++r) {
          const double* y = n.value.data.data() + r * c;
          const double* g = G.data.data() + r * c;
          double dot = 0.0;
          for (int64_t j = 0; j < c; ++j) dot += g[j] * y[j];
          double* d = dx.data.data() + r * c;
          for (int64_t j = 0; j < c; ++j) d[j] = y[j] * (g[j] - dot);
        }
        accumulate(n.inputs[0], dx);
        break;
      }
      case OpKind::LayerNorm: {
        const Tensor& x = inv(0);
        const Tensor& gamma = inv(1);
        int64_t c = x.shape.back();
        int64_t rows = x.numel() / c;
        Tensor dx = wants(0) ? Tensor::zeros(x.shape) : Tensor();
        Tensor dgamma = wants(1) ? Tensor::zeros({c}) : Tensor();
        Tensor dbeta = wants(2) ? Tensor::zeros({c}) : Tensor();
        std::vector<double> xhat(static_cast<size_t>(c));
        for (int64_t r = 0; r < rows; ++r) {
          const double* xr = x.data.data() + r * c;
          const double* g = G.data.data() + r * c;
          double m = 0.0;
          for (int64_t j = 0; j < c; ++j) m += xr[j];
          m /= static_cast<double>(c);
          double v = 0.0;
          for (int64_t j = 0; j < c; ++j) {
            double d = xr[j] - m;
            v += d * d;
          }
          v /= static_cast<double>(c);
          double s = std::sqrt(v + n.scalar);
          for (int64_t j = 0; j < c; ++j) xhat[static_cast<size_t>(j)] = (xr[j] - m) / s;
          if (wants(1)) {
            for (int64_t j = 0; j < c; ++j) dgamma.data[static_cast<size_t>(j)] += g[j] * xhat[static_cast<size_t>(j)];
          }
          if (wants(2)) {
            for (int64_t j = 0; j < c; ++j) dbeta.data[static_cast<size_t>(j)] += g[j];
          }
          if (wants(0)) {
            double mean_gp = 0.0, mean_gx = 0.0;
            for (int64_t j = 0; j < c; ++j) {
              double gp = g[j] * gamma.data[static_cast<size_t>(j)];
              mean_gp += gp;
              mean_gx += gp * xhat[static_cast<size_t>(j)];
            }
            mean_gp /= static_cast<double>(c);
            mean_gx /= static_cast<double>(c);
            double* d = dx.data.data() + r * c;
            for (int64_t j = 0; j < c; ++j) {
              double gp = g[j] * gamma.data[static_cast<size_t>(j)];
              d[j] = (gp - mean_gp - xhat[static_cast<size_t>(j)] * mean_gx) / s;
            }
          }
        }
        if (wants(0)) accumulate(n.inputs[0], dx);
        if (wants(1)) accumulate(n.inputs[1], dgamma);
        if (wants(2)) accumulate(n.inputs[2], dbeta);
        break;
      }
      case OpKind::Dropout:
        if (wants(0)) accumulate(n.inputs[0], ngt::hadamard(G, n.aux));
        break;
      case OpKind::Reshape:
        if (wants(0)) accumulate(n.inputs[0], ngt::reshape(G, inv(0).shape));
        break;
      case OpKind::Permute: {
        if (!wants(0)) break;
        std::vector<int> inverse(n.axes.size());
        for (size_t i = 0; i < n.axes.size(); ++i) inverse[static_cast<size_t>(n.axes[i])] = static_cast<int>(i);
        accumulate(n.inputs[0], ngt::permute(G, inverse));
        break;
      }
      case OpKind::Slice: {
        if (!wants(0)) break;
        const Tensor& x = inv(0);
        int axis = static_cast<int>(n.i64s[0]);
        int64_t start = n.i64s[1], len = n.i64s[2];
        int64_t nax = x.shape[static_cast<size_t>(axis)];
        int64_t inner = 1;
        for (int i = axis + 1; i < x.rank(); ++i) inner *= x.shape[static_cast<size_t>(i)];
        int64_t outer = x.numel() / (nax * inner);
        Tensor dx = Tensor::zeros(x.shape);
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t k = 0; k < len * inner; ++k) {
            dx.data[static_cast<size_t>((o * nax + start) * inner + k)] =
                G.data[static_cast<size_t>(o * len * inner + k)];
          }
        }
        accumulate(n.inputs[0], dx);
        break;
      }
      case OpKind::GatherRows: {
        if (!wants(0)) break;
        const Tensor& table = inv(0);
        int64_t c = table.shape[1];
        Tensor dt = Tensor::zeros(table.shape);
        for (size_t r = 0; r < n.i64s.size(); ++r) {
          double* dst = dt.data.data() + n.i64s[r] * c;
          const double* src = G.data.data() + static_cast<int64_t>(r) * c;
          for (int64_t j = 0; j < c; ++j) dst[j] += src[j];
        }
        accumulate(n.inputs[0], dt);
        break;
      }
      case OpKind::SumAll:
        if (wants(0)) accumulate(n.inputs[0], Tensor::full(inv(0).shape, G.data[0]));
        break;
      case OpKind::MeanAll:
        if (wants(0)) {
          accumulate(n.inputs[0],
                     Tensor::full(inv(0).shape, G.data[0] / static_cast<double>(inv(0).numel())));
        }
        break;
      case OpKind::BceWithLogits: {
        if (!wants(0)) break;
        const Tensor& z = inv(0);
        Tensor dz = Tensor::zeros(z.shape);
        double scale_g = G.data[0] / static_cast<double>(z.numel());
        for (size_t i = 0; i < z.data.size(); ++i) {
          double zi = z.data[i];
          double sig = zi >= 0.0 ? 1.0 / (1.0 + std::exp(-zi))
                                 : std::exp(zi) / (1.0 + std::exp(zi));
          dz.data[i] = scale_g * (sig - n.aux.data[i]);
        }
        accumulate(n.inputs[0], dz);
        break;
      }
      case OpKind::SoftmaxXent: {
        if (!wants(0)) break;
        const Tensor& z = inv(0);
        int64_t B = z.shape[0], C = z.shape[1];
        Tensor dz = Tensor::zeros(z.shape);
        double scale_g = G.data[0] / static_cast<double>(B);
        for (int64_t i = 0; i < B; ++i) {
          const double* row = z.data.data() + i * C;
          double m = row[0];
          for (int64_t j = 1; j < C; ++j) m = std::max(m, row[j]);
          double s = 0.0;
          for (int64_t j = 0; j < C; ++j) s += std::exp(row[j] - m);
          double* d = dz.data.data() + i * C;
          for (int64_t j = 0; j < C; ++j) d[j] = scale_g * (std::exp(row[j] - m) / s);
          d[n.i64s[static_cast<size_t>(i)]] -= scale_g;
        }
        accumulate(n.inputs[0], dz);
        break;
      }
    }
  }

  Gradients out;
  for (const Node& n : nodes_) {
    if (n.op == OpKind::Leaf && n.requires_grad && !n.name.empty() && n.grad.numel() > 0) {
      out.emplace(n.name, n.grad);
    }
  }
  return out;
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  require(eps > 0.0, "finite_diff_grad: eps must be positive");
  Tensor grad = Tensor::zeros(x.shape);
  Tensor probe = x;
  for (size_t i = 0; i < x.data.size(); ++i) {
    double old = probe.data[i];
    probe.data[i] = old + eps;
    double fp = f(probe);
    probe.data[i] = old - eps;
    double fm = f(probe);
    probe.data[i] = old;
    grad.data[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

GradCheckReport grad_check(Graph& g, NodeId loss, const GradCheckOptions& opts) {
  if (g.has_train_dropout() && !opts.freeze_dropout_masks) {
    fail("grad_check: stochastic graph without frozen dropout masks");
  }
  require(opts.eps > 0.0 && opts.tolerance > 0.0 && opts.max_coords_per_param > 0,
          "grad_check: invalid options");

  Gradients analytic = g.backward(loss);
  GradCheckReport report;
  const Graph& cg = g;

  for (NodeId leaf : g.named_leaves()) {
    const Node& n = cg.node(leaf);
    auto it = analytic.find(n.name);
    if (it == analytic.end()) continue;  // loss never reached this parameter
    const Tensor& a = it->second;
    int64_t numel = n.value.numel();

    std::vector<int64_t> coords;
    if (numel <= opts.max_coords_per_param) {
      coords.resize(static_cast<size_t>(numel));
      for (int64_t i = 0; i < numel; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      coords.resize(static_cast<size_t>(numel));
      for (int64_t i = 0; i < numel; ++i) coords[static_cast<size_t>(i)] = i;
      Rng rng = Rng::stream(opts.sample_seed, "gradcheck", static_cast<uint64_t>(leaf));
      fisher_yates(coords, rng);
      coords.resize(static_cast<size_t>(opts.max_coords_per_param));
    }

    ParamCheck pc;
    pc.name = n.name;
    pc.coords = static_cast<int64_t>(coords.size());
    for (int64_t c : coords) {
      double old = g.leaf_element(leaf, c);
      g.poke_leaf(leaf, c, old + opts.eps);
      g.recompute();
      double lp = g.value(loss).data[0];
      g.poke_leaf(leaf, c, old - opts.eps);
      g.recompute();
      double lm = g.value(loss).data[0];
      g.poke_leaf(leaf, c, old);

      double numeric = (lp - lm) / (2.0 * opts.eps);
      double exact = a.data[static_cast<size_t>(c)];
      double rel = std::abs(exact - numeric) /
                   std::max({std::abs(exact), std::abs(numeric), 1e-8});
      pc.max_rel_err = std::max(pc.max_rel_err, rel);
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = n.name;
        report.worst_coord = c;
        report.analytic_at_worst = exact;
        report.numeric_at_worst = numeric;
      }
    }
    report.per_param.push_back(std::move(pc));
  }

  g.recompute();  // leave cached values consistent with the restored leaves
  report.pass = report.max_rel_err <= opts.tolerance;
  return report;
}

}  // namespace ngt::ad
