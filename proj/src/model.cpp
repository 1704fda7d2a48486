// SPDX-License-Identifier: Apache-2.0

#include "ngt/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ngt/rng.hpp"

namespace ngt {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

constexpr double kMaskPenalty = -1e9;

Tensor normal_tensor(std::vector<int64_t> shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.normal(0.0, stddev);
  return t;
}

void add_layer_params(ParamSet& p, const std::string& prefix, const ModelConfig& cfg,
                      Rng& rng) {
  int64_t H = cfg.hidden, I = cfg.intermediate;
  double sd = cfg.init_std;
  for (const char* proj : {"q", "k", "v", "out"}) {
    p.add(prefix + "attn." + proj + ".w", normal_tensor({H, H}, sd, rng));
    p.add(prefix + "attn." + proj + ".b", Tensor::zeros({H}));
  }
  p.add(prefix + "attn.ln.gamma", Tensor::ones({H}));
  p.add(prefix + "attn.ln.beta", Tensor::zeros({H}));
  p.add(prefix + "ffn.in.w", normal_tensor({H, I}, sd, rng));
  p.add(prefix + "ffn.in.b", Tensor::zeros({I}));
  p.add(prefix + "ffn.out.w", normal_tensor({I, H}, sd, rng));
  p.add(prefix + "ffn.out.b", Tensor::zeros({H}));
  p.add(prefix + "ffn.ln.gamma", Tensor::ones({H}));
  p.add(prefix + "ffn.ln.beta", Tensor::zeros({H}));
}

ad::NodeId leaf_of(const ParamLeaves& leaves, const std::string& name) {
  auto it = leaves.find(name);
  if (it == leaves.end()) fail("forward: missing parameter tensor " + name);
  return it->second;
}

}  // namespace

void validate_model(const ModelConfig& cfg) {
  require(cfg.vocab_size >= 1, "model config: vocab_size must be >= 1");
  require(cfg.max_positions >= 1, "model config: max_positions must be >= 1");
  require(cfg.type_vocab >= 1, "model config: type_vocab must be >= 1");
  require(cfg.hidden >= 1 && cfg.num_layers >= 1 && cfg.heads >= 1 &&
              cfg.intermediate >= 1,
          "model config: dimensions must be >= 1");
  require(cfg.hidden % cfg.heads == 0, "model config: hidden " +
                                           std::to_string(cfg.hidden) +
                                           " not divisible by heads " +
                                           std::to_string(cfg.heads));
  require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "model config: dropout must be in [0, 1)");
  require(cfg.ln_eps > 0.0, "model config: ln_eps must be positive");
  require(cfg.init_std > 0.0, "model config: init_std must be positive");
  require(cfg.output_units >= 1, "model config: output_units must be >= 1");
}

Tensor& ParamSet::add(const std::string& name, Tensor t) {
  require(!name.empty(), "param set: empty tensor name");
  require(map_.count(name) == 0, "param set: duplicate tensor " + name);
  order_.push_back(name);
  return map_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) fail("param set: no tensor named " + name);
  return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) fail("param set: no tensor named " + name);
  return it->second;
}

int64_t ParamSet::total_elements() const {
  int64_t n = 0;
  for (const auto& name : order_) n += map_.at(name).numel();
  return n;
}

ParamSet init_host_params(const ModelConfig& cfg, uint64_t seed) {
  validate_model(cfg);
  Rng rng = Rng::stream(seed, "init.host");
  ParamSet p;
  int64_t H = cfg.hidden;
  p.add("emb.token", normal_tensor({cfg.vocab_size, H}, cfg.init_std, rng));
  p.add("emb.position", normal_tensor({cfg.max_positions, H}, cfg.init_std, rng));
  p.add("emb.type", normal_tensor({cfg.type_vocab, H}, cfg.init_std, rng));
  p.add("emb.ln.gamma", Tensor::ones({H}));
  p.add("emb.ln.beta", Tensor::zeros({H}));
  for (int64_t k = 1; k <= cfg.num_layers; ++k) {
    add_layer_params(p, "enc." + std::to_string(k) + ".", cfg, rng);
  }
  if (cfg.has_pooler) {
    p.add("pooler.w", normal_tensor({H, H}, cfg.init_std, rng));
    p.add("pooler.b", Tensor::zeros({H}));
  }
  p.add("head.w", normal_tensor({H, cfg.output_units}, cfg.init_std, rng));
  p.add("head.b", Tensor::zeros({cfg.output_units}));
  return p;
}

void add_gating_params(ParamSet& params, const ModelConfig& cfg,
                       const GatingConfig& gating, uint64_t seed) {
  validate_model(cfg);
  validate_gating(gating, cfg.num_layers);
  if (gating.variant == GatingVariant::NoGatingBlock) return;
  Rng rng = Rng::stream(seed, "init.gate");
  for (int64_t pos : gating.positions) {
    for (int64_t j = 1; j <= gating.gb_depth; ++j) {
      add_layer_params(params,
                       "gb.p" + std::to_string(pos) + "." + std::to_string(j) + ".",
                       cfg, rng);
    }
  }
}

int64_t per_layer_param_count(int64_t hidden, int64_t intermediate) {
  int64_t H = hidden, I = intermediate;
  return 4 * (H * H + H) + (H * I + I) + (I * H + H) + 4 * H;
}

int64_t param_count(const ModelConfig& cfg, const GatingConfig& gating) {
  validate_model(cfg);
  validate_gating(gating, cfg.num_layers);
  int64_t H = cfg.hidden;
  int64_t n = (cfg.vocab_size + cfg.max_positions + cfg.type_vocab) * H + 2 * H;
  n += cfg.num_layers * per_layer_param_count(H, cfg.intermediate);
  if (cfg.has_pooler) n += H * H + H;
  n += H * cfg.output_units + cfg.output_units;
  if (gating.variant != GatingVariant::NoGatingBlock) {
    n += static_cast<int64_t>(gating.positions.size()) * gating.gb_depth *
         per_layer_param_count(H, cfg.intermediate);
  }
  return n;
}

void save_params(const ParamSet& params, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "save_params: cannot open " + path);
  out << "ngt-params v1\n";
  out << "tensors " << params.names().size() << "\n";
  char buf[40];
  for (const auto& name : params.names()) {
    const Tensor& t = params.at(name);
    out << name << " " << t.rank();
    for (int64_t d : t.shape) out << " " << d;
    out << "\n";
    for (size_t i = 0; i < t.data.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", t.data[i]);
      if (i) out << " ";
      out << buf;
    }
    out << "\n";
  }
  require(out.good(), "save_params: write failed for " + path);
}

ParamSet load_params(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_params: cannot open " + path);
  std::string magic, version_token;
  in >> magic >> version_token;
  require(magic == "ngt-params" && version_token == "v1",
          "load_params: " + path + " is not a v1 parameter file");
  std::string tensors_kw;
  size_t count = 0;
  in >> tensors_kw >> count;
  require(tensors_kw == "tensors", "load_params: malformed header in " + path);
  ParamSet p;
  for (size_t i = 0; i < count; ++i) {
    std::string name;
    int rank = -1;
    in >> name >> rank;
    require(in.good() && rank >= 1, "load_params: malformed tensor header in " + path);
    std::vector<int64_t> shape(static_cast<size_t>(rank));
    for (auto& d : shape) in >> d;
    int64_t numel = shape_numel(shape);
    Tensor t = Tensor::zeros(shape);
    for (int64_t j = 0; j < numel; ++j) in >> t.data[static_cast<size_t>(j)];
    require(!in.fail(), "load_params: truncated data for " + name + " in " + path);
    p.add(name, std::move(t));
  }
  return p;
}

ParamLeaves add_param_leaves(ad::Graph& g, const ParamSet& params) {
  ParamLeaves leaves;
  for (const auto& name : params.names()) {
    leaves.emplace(name, g.leaf(params.at(name), name));
  }
  return leaves;
}

ad::NodeId encoder_layer_graph(ad::Graph& g, const ParamLeaves& leaves,
                               const std::string& prefix, const ModelConfig& cfg,
                               ad::NodeId x, ad::NodeId attn_mask, int64_t batch,
                               int64_t seq_len, const ForwardOptions& opts,
                               Rng& drop_rng) {
  int64_t H = cfg.hidden, A = cfg.heads, T = seq_len, B = batch;
  int64_t dh = H / A;

  auto proj = [&](const char* name, ad::NodeId in) {
    return g.add_bias(g.matmul(in, leaf_of(leaves, prefix + "attn." + name + ".w")),
                      leaf_of(leaves, prefix + "attn." + name + ".b"));
  };
  // [B*T, H] -> [B*A, T, dh]
  auto to_heads = [&](ad::NodeId in) {
    return g.reshape(g.permute(g.reshape(in, {B, T, A, dh}), {0, 2, 1, 3}),
                     {B * A, T, dh});
  };

  ad::NodeId q = to_heads(proj("q", x));
  ad::NodeId k = to_heads(proj("k", x));
  ad::NodeId v = to_heads(proj("v", x));

  ad::NodeId scores = g.scale(g.bmm(q, g.permute(k, {0, 2, 1})),
                              1.0 / std::sqrt(static_cast<double>(dh)));
  ad::NodeId probs = g.softmax_last(g.add(scores, attn_mask));
  if (opts.attn_probs) opts.attn_probs->push_back(probs);
  probs = g.dropout(probs, cfg.dropout, opts.train, drop_rng);

  ad::NodeId ctx = g.reshape(
      g.permute(g.reshape(g.bmm(probs, v), {B, A, T, dh}), {0, 2, 1, 3}), {B * T, H});
  ad::NodeId attn_out = proj("out", ctx);
  attn_out = g.dropout(attn_out, cfg.dropout, opts.train, drop_rng);
  ad::NodeId h1 = g.layer_norm(g.add(x, attn_out),
                               leaf_of(leaves, prefix + "attn.ln.gamma"),
                               leaf_of(leaves, prefix + "attn.ln.beta"), cfg.ln_eps);

  ad::NodeId inter = g.gelu(g.add_bias(g.matmul(h1, leaf_of(leaves, prefix + "ffn.in.w")),
                                       leaf_of(leaves, prefix + "ffn.in.b")));
  ad::NodeId ffn_out = g.add_bias(g.matmul(inter, leaf_of(leaves, prefix + "ffn.out.w")),
                                  leaf_of(leaves, prefix + "ffn.out.b"));
  ffn_out = g.dropout(ffn_out, cfg.dropout, opts.train, drop_rng);
  return g.layer_norm(g.add(h1, ffn_out), leaf_of(leaves, prefix + "ffn.ln.gamma"),
                      leaf_of(leaves, prefix + "ffn.ln.beta"), cfg.ln_eps);
}

Tensor attention_mask_tensor(const std::vector<double>& keep, int64_t batch,
                             int64_t heads, int64_t seq_len) {
  int64_t B = batch, A = heads, T = seq_len;
  require(keep.size() == static_cast<size_t>(B * T),
          "attention mask: keep flags must have batch*seq entries");
  Tensor m = Tensor::zeros({B * A, T, T});
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t a = 0; a < A; ++a) {
      double* base = m.data.data() + (b * A + a) * T * T;
      for (int64_t i = 0; i < T; ++i) {
        for (int64_t j = 0; j < T; ++j) {
          base[i * T + j] = (1.0 - keep[static_cast<size_t>(b * T + j)]) * kMaskPenalty;
        }
      }
    }
  }
  return m;
}

ad::NodeId model_forward_graph(ad::Graph& g, const ParamSet& params,
                               const ModelConfig& cfg, const GatingConfig& gating,
                               const Batch& batch, const ForwardOptions& opts) {
  validate_model(cfg);
  validate_gating(gating, cfg.num_layers);
  int64_t B = batch.batch, T = batch.seq_len, H = cfg.hidden;
  require(B >= 1 && T >= 1, "forward: empty batch");
  require(T <= cfg.max_positions, "forward: sequence length " + std::to_string(T) +
                                      " exceeds max_positions " +
                                      std::to_string(cfg.max_positions));
  size_t want = static_cast<size_t>(B * T);
  require(batch.tokens.size() == want && batch.mask.size() == want &&
              batch.segments.size() == want,
          "forward: batch field sizes disagree with batch*seq_len");
  for (int64_t id : batch.tokens) {
    require(id >= 0 && id < cfg.vocab_size,
            "forward: token id " + std::to_string(id) + " outside vocab of " +
                std::to_string(cfg.vocab_size));
  }
  for (int64_t s : batch.segments) {
    require(s >= 0 && s < cfg.type_vocab, "forward: segment id out of range");
  }
  for (double mv : batch.mask) {
    require(mv == 0.0 || mv == 1.0, "forward: attention mask entries must be 0 or 1");
  }

  ParamLeaves leaves = add_param_leaves(g, params);
  Rng drop_rng = Rng::stream(opts.dropout_seed, "dropout", opts.dropout_step);

  std::vector<int64_t> pos_ids(want), seg = batch.segments;
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t t = 0; t < T; ++t) pos_ids[static_cast<size_t>(b * T + t)] = t;
  }

  ad::NodeId tok = g.gather_rows(leaf_of(leaves, "emb.token"), batch.tokens);
  ad::NodeId pos = g.gather_rows(leaf_of(leaves, "emb.position"), pos_ids);
  ad::NodeId typ = g.gather_rows(leaf_of(leaves, "emb.type"), seg);
  ad::NodeId x = g.add(g.add(tok, pos), typ);
  x = g.layer_norm(x, leaf_of(leaves, "emb.ln.gamma"), leaf_of(leaves, "emb.ln.beta"),
                   cfg.ln_eps);
  x = g.dropout(x, cfg.dropout, opts.train, drop_rng);

  ad::NodeId attn_mask = g.constant(attention_mask_tensor(batch.mask, B, cfg.heads, T));
  x = forward_with_gating_graph(g, leaves, cfg, gating, x, attn_mask, B, T, opts,
                                drop_rng);

  ad::NodeId cls = g.reshape(g.slice(g.reshape(x, {B, T, H}), 1, 0, 1), {B, H});
  ad::NodeId pooled = cls;
  if (cfg.has_pooler) {
    pooled = g.tanh(g.add_bias(g.matmul(cls, leaf_of(leaves, "pooler.w")),
                               leaf_of(leaves, "pooler.b")));
  }
  return g.add_bias(g.matmul(pooled, leaf_of(leaves, "head.w")),
                    leaf_of(leaves, "head.b"));
}

Tensor model_forward(const ParamSet& params, const ModelConfig& cfg,
                     const GatingConfig& gating, const Batch& batch,
                     const ForwardOptions& opts) {
  ad::Graph g;
  ad::NodeId logits = model_forward_graph(g, params, cfg, gating, batch, opts);
  return g.value(logits);
}

}  // namespace ngt
