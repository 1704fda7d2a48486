// SPDX-License-Identifier: Apache-2.0

#include "ngt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "ngt/autodiff.hpp"
#include "ngt/rng.hpp"

namespace ngt {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int64_t to_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    int64_t v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (...) {
    fail("config: " + key + " expects an integer, got '" + value + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    if (!value.empty() && value[0] == '-') throw std::invalid_argument(value);
    uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (...) {
    fail("config: " + key + " expects a non-negative integer, got '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (...) {
    fail("config: " + key + " expects a number, got '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  fail("config: " + key + " expects true/false or 1/0, got '" + value + "'");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  return out;
}

std::vector<int64_t> to_int_list(const std::string& key, const std::string& value) {
  std::vector<int64_t> out;
  for (const auto& item : split_commas(value)) {
    require(!item.empty(), "config: " + key + " has an empty list item");
    out.push_back(to_int(key, item));
  }
  return out;
}

std::vector<uint64_t> to_u64_list(const std::string& key, const std::string& value) {
  std::vector<uint64_t> out;
  for (const auto& item : split_commas(value)) {
    require(!item.empty(), "config: " + key + " has an empty list item");
    out.push_back(to_u64(key, item));
  }
  return out;
}

// Shortest decimal string that parses back to exactly v.
std::string num(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
  std::ostringstream out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out << ",";
    out << v[i];
  }
  return out.str();
}

// Output units are fixed by the task (plus n_symbols for the copy task), so
// the loss/head pairing can be checked before any data is touched.
int64_t task_output_units(const ExperimentConfig& cfg) {
  if (cfg.task == "cb") return 3;
  if (cfg.task == "gated_copy") return cfg.n_symbols;
  return 1;  // majority, boolq, rte
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "profile") return;  // applied before the overrides
  if (key == "task") { cfg.task = value; return; }
  if (key == "variant") { cfg.gating.variant = variant_from_name(value); return; }
  if (key == "positions") { cfg.gating.positions = to_int_list(key, value); return; }
  if (key == "gb_depth") { cfg.gating.gb_depth = to_int(key, value); return; }
  if (key == "gb_sigmoid") { cfg.gating.gb_sigmoid = to_bool(key, value); return; }
  if (key == "seeds") { cfg.seeds = to_u64_list(key, value); return; }
  if (key == "out_dir") { cfg.out_dir = value; return; }
  if (key == "hidden") { cfg.model.hidden = to_int(key, value); return; }
  if (key == "layers") { cfg.model.num_layers = to_int(key, value); return; }
  if (key == "heads") { cfg.model.heads = to_int(key, value); return; }
  if (key == "intermediate") { cfg.model.intermediate = to_int(key, value); return; }
  if (key == "dropout") { cfg.model.dropout = to_double(key, value); return; }
  if (key == "init_std") { cfg.model.init_std = to_double(key, value); return; }
  if (key == "ln_eps") { cfg.model.ln_eps = to_double(key, value); return; }
  if (key == "pooler") { cfg.model.has_pooler = to_bool(key, value); return; }
  if (key == "max_len") { cfg.max_len = to_int(key, value); return; }
  if (key == "batch_size") { cfg.batch_size = to_int(key, value); return; }
  if (key == "epochs") { cfg.epochs = to_int(key, value); return; }
  if (key == "loss") { cfg.loss = value; return; }
  if (key == "lr0") { cfg.optim.lr0 = to_double(key, value); return; }
  if (key == "beta1") { cfg.optim.beta1 = to_double(key, value); return; }
  if (key == "beta2") { cfg.optim.beta2 = to_double(key, value); return; }
  if (key == "weight_decay") { cfg.optim.weight_decay = to_double(key, value); return; }
  if (key == "adam_eps") { cfg.optim.eps = to_double(key, value); return; }
  if (key == "total_steps") { cfg.optim.total_steps = to_int(key, value); return; }
  if (key == "data_seed") { cfg.data_seed = to_u64(key, value); return; }
  if (key == "n_train") { cfg.n_train = to_int(key, value); return; }
  if (key == "n_val") { cfg.n_val = to_int(key, value); return; }
  if (key == "seq_len") { cfg.seq_len = to_int(key, value); return; }
  if (key == "n_symbols") { cfg.n_symbols = to_int(key, value); return; }
  if (key == "train_jsonl") { cfg.train_jsonl = value; return; }
  if (key == "val_jsonl") { cfg.val_jsonl = value; return; }
  if (key == "early_stop_acc") { cfg.early_stop_acc = to_double(key, value); return; }
  if (key == "host_seed") { cfg.host_seed = to_u64(key, value); return; }
  if (key == "init_from") { cfg.init_from = value; return; }
  if (key == "dump_gates") { cfg.dump_gates = to_bool(key, value); return; }
  if (key == "save_params") { cfg.save_params = to_bool(key, value); return; }
  fail("config: unknown key '" + key + "'");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open " + path + " for writing");
  out << text;
  require(out.good(), "write failed for " + path);
}

double eval_metric(const std::string& name, const std::vector<int64_t>& preds,
                   const std::vector<int64_t>& labels, const TaskSpec& task) {
  if (name == "acc") return accuracy(preds, labels);
  if (name == "f1") return f1_binary(preds, labels);
  if (name == "f1_macro") return f1_macro(preds, labels, task.num_classes);
  fail("eval: unsupported metric '" + name + "'");
}

std::string epoch_record_json(const EpochRecord& rec) {
  json j;
  j["epoch"] = rec.epoch;
  j["loss"] = rec.loss;
  j["lr"] = rec.lr;
  json ms = json::object();
  for (const auto& m : rec.metrics) ms[m.name] = m.value * 100.0;
  j["metrics"] = ms;
  j["seed"] = rec.seed;
  return j.dump();
}

void append_cells(std::vector<Cell>& into, const std::vector<Cell>& more) {
  into.insert(into.end(), more.begin(), more.end());
}

SuiteReport finish_report(const std::string& out_dir, const std::vector<Cell>& cells) {
  SuiteReport report = aggregate(cells);
  write_text_file(out_dir + "/summary.csv", cells_csv(cells));
  write_text_file(out_dir + "/report.txt", render_suite_table(report));
  return report;
}

}  // namespace

void apply_profile(ExperimentConfig& cfg, const std::string& name) {
  cfg.profile = name;
  cfg.model = ModelConfig{};
  cfg.gating = GatingConfig{};
  cfg.optim = OptimConfig{};
  cfg.optim.total_steps = 0;  // derived from the dataset unless overridden
  if (name == "toy") {
    cfg.model.hidden = 32;
    cfg.model.num_layers = 4;
    cfg.model.heads = 4;
    cfg.model.intermediate = 64;
    cfg.gating.positions = {3};
    cfg.gating.gb_depth = 1;
    cfg.optim.lr0 = 3e-4;
    cfg.max_len = 32;
    cfg.batch_size = 8;
    cfg.epochs = 20;
  } else if (name == "large") {
    cfg.model.vocab_size = 28996;
    cfg.model.max_positions = 512;
    cfg.model.hidden = 1024;
    cfg.model.num_layers = 24;
    cfg.model.heads = 16;
    cfg.model.intermediate = 4096;
    cfg.gating.positions = {21};
    cfg.gating.gb_depth = 3;
    cfg.optim.lr0 = 1e-5;
    cfg.max_len = 512;
    cfg.batch_size = 8;
    cfg.epochs = 10;
  } else {
    fail("config: unknown profile '" + name + "' (expected toy or large)");
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = line;
    size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    size_t eq = s.find('=');
    require(eq != std::string::npos,
            "config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    require(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
    require(seen.insert(key).second,
            "config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    pairs.emplace_back(std::move(key), std::move(value));
  }

  std::string profile = "toy";
  for (const auto& [k, v] : pairs)
    if (k == "profile") profile = v;
  ExperimentConfig cfg;
  apply_profile(cfg, profile);
  for (const auto& [k, v] : pairs) apply_key(cfg, k, v);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "profile = " << cfg.profile << "\n";
  out << "task = " << cfg.task << "\n";
  out << "variant = " << variant_name(cfg.gating.variant) << "\n";
  out << "positions = " << join_list(cfg.gating.positions) << "\n";
  out << "gb_depth = " << cfg.gating.gb_depth << "\n";
  out << "gb_sigmoid = " << (cfg.gating.gb_sigmoid ? "true" : "false") << "\n";
  out << "seeds = " << join_list(cfg.seeds) << "\n";
  out << "out_dir = " << cfg.out_dir << "\n";
  out << "hidden = " << cfg.model.hidden << "\n";
  out << "layers = " << cfg.model.num_layers << "\n";
  out << "heads = " << cfg.model.heads << "\n";
  out << "intermediate = " << cfg.model.intermediate << "\n";
  out << "dropout = " << num(cfg.model.dropout) << "\n";
  out << "init_std = " << num(cfg.model.init_std) << "\n";
  out << "ln_eps = " << num(cfg.model.ln_eps) << "\n";
  out << "pooler = " << (cfg.model.has_pooler ? "true" : "false") << "\n";
  out << "max_len = " << cfg.max_len << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "loss = " << cfg.loss << "\n";
  out << "lr0 = " << num(cfg.optim.lr0) << "\n";
  out << "beta1 = " << num(cfg.optim.beta1) << "\n";
  out << "beta2 = " << num(cfg.optim.beta2) << "\n";
  out << "weight_decay = " << num(cfg.optim.weight_decay) << "\n";
  out << "adam_eps = " << num(cfg.optim.eps) << "\n";
  out << "total_steps = " << cfg.optim.total_steps << "\n";
  out << "data_seed = " << cfg.data_seed << "\n";
  out << "n_train = " << cfg.n_train << "\n";
  out << "n_val = " << cfg.n_val << "\n";
  out << "seq_len = " << cfg.seq_len << "\n";
  out << "n_symbols = " << cfg.n_symbols << "\n";
  out << "train_jsonl = " << cfg.train_jsonl << "\n";
  out << "val_jsonl = " << cfg.val_jsonl << "\n";
  out << "early_stop_acc = " << num(cfg.early_stop_acc) << "\n";
  out << "host_seed = " << cfg.host_seed << "\n";
  out << "init_from = " << cfg.init_from << "\n";
  out << "dump_gates = " << (cfg.dump_gates ? "true" : "false") << "\n";
  out << "save_params = " << (cfg.save_params ? "true" : "false") << "\n";
  return out.str();
}

void validate_experiment(const ExperimentConfig& cfg) {
  static const std::set<std::string> kTasks = {"majority", "gated_copy", "boolq", "cb", "rte"};
  require(kTasks.count(cfg.task) != 0,
          "config: unknown task '" + cfg.task + "' (majority | gated_copy | boolq | cb | rte)");
  require(cfg.loss == "auto" || cfg.loss == "bce" || cfg.loss == "cce",
          "config: loss must be auto, bce, or cce");
  require(!cfg.seeds.empty(), "config: seeds must be non-empty");
  {
    std::set<uint64_t> uniq(cfg.seeds.begin(), cfg.seeds.end());
    require(uniq.size() == cfg.seeds.size(), "config: seeds must be distinct");
  }
  require(cfg.max_len >= 3, "config: max_len must be >= 3");
  require(cfg.batch_size >= 1, "config: batch_size must be >= 1");
  require(cfg.epochs >= 1, "config: epochs must be >= 1");
  require(cfg.early_stop_acc >= 0.0 && cfg.early_stop_acc <= 1.0,
          "config: early_stop_acc must be in [0, 1]");
  if (cfg.task == "majority" || cfg.task == "gated_copy") {
    require(cfg.n_train >= 1 && cfg.n_val >= 1, "config: n_train and n_val must be >= 1");
    if (cfg.task == "majority")
      require(cfg.seq_len >= 1 && cfg.seq_len % 2 == 1,
              "config: majority needs an odd seq_len");
    else
      require(cfg.seq_len >= 3, "config: gated_copy needs seq_len >= 3");
    if (cfg.task == "gated_copy")
      require(cfg.n_symbols >= 2, "config: n_symbols must be >= 2");
  } else {
    require(!cfg.train_jsonl.empty() && !cfg.val_jsonl.empty(),
            "config: " + cfg.task + " needs train_jsonl and val_jsonl");
  }
  const int64_t units = task_output_units(cfg);
  require(!(cfg.loss == "cce" && units == 1),
          "config: loss cce needs more than one output unit, task '" + cfg.task + "' has 1");
  require(!(cfg.loss == "bce" && units != 1),
          "config: loss bce needs exactly one output unit, task '" + cfg.task + "' has " +
              std::to_string(units));
  require(cfg.model.hidden >= 1 && cfg.model.num_layers >= 1 && cfg.model.heads >= 1 &&
              cfg.model.intermediate >= 1,
          "config: model dimensions must be positive");
  require(cfg.model.hidden % cfg.model.heads == 0,
          "config: hidden must be divisible by heads");
  // Profiles carry default positions so a gated variant is one key away; the
  // no-gating variant simply ignores them.
  GatingConfig gcheck = cfg.gating;
  if (gcheck.variant == GatingVariant::NoGatingBlock) gcheck.positions.clear();
  validate_gating(gcheck, cfg.model.num_layers);
  require(cfg.optim.lr0 > 0.0, "config: lr0 must be > 0");
  require(cfg.optim.total_steps >= 0, "config: total_steps must be >= 0 (0 = derive)");
}

PreparedData prepare_data(ExperimentConfig& cfg) {
  validate_experiment(cfg);
  if (cfg.gating.variant == GatingVariant::NoGatingBlock) cfg.gating.positions.clear();
  PreparedData out;
  TaskSpec& task = out.task;
  task.name = cfg.task;
  task.epochs = cfg.epochs;

  if (cfg.task == "majority" || cfg.task == "gated_copy") {
    SyntheticDataset ds =
        cfg.task == "majority"
            ? gen_majority(cfg.data_seed, cfg.n_train + cfg.n_val, cfg.seq_len)
            : gen_gated_copy(cfg.data_seed, cfg.n_train + cfg.n_val, cfg.seq_len,
                             cfg.n_symbols);
    task.num_classes = ds.num_classes;
    out.vocab = vocab_for(ds);
    std::vector<Example> all = encode_synthetic(ds, out.vocab, cfg.max_len);
    out.train.assign(all.begin(), all.begin() + cfg.n_train);
    out.val.assign(all.begin() + cfg.n_train, all.end());
  } else {
    SuperGlueSchema schema = schema_from_name(cfg.task);
    out.vocab = vocab_from_superglue({cfg.train_jsonl, cfg.val_jsonl}, schema);
    out.train = load_superglue_jsonl(cfg.train_jsonl, schema, out.vocab, cfg.max_len);
    out.val = load_superglue_jsonl(cfg.val_jsonl, schema, out.vocab, cfg.max_len);
    task.num_classes = cfg.task == "cb" ? 3 : 2;
  }
  require(!out.train.empty() && !out.val.empty(),
          "prepare_data: train and validation sets must be non-empty");

  task.output_units = task_output_units(cfg);
  task.metrics = cfg.task == "cb" ? std::vector<std::string>{"f1_macro", "acc"}
                                  : std::vector<std::string>{"acc"};
  if (cfg.loss == "auto") cfg.loss = task.output_units == 1 ? "bce" : "cce";

  cfg.model.vocab_size = out.vocab.size();
  cfg.model.output_units = task.output_units;
  cfg.model.max_positions = cfg.max_len;
  validate_model(cfg.model);
  validate_gating(cfg.gating, cfg.model.num_layers);

  const int64_t steps_per_epoch =
      (static_cast<int64_t>(out.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  task.total_steps = steps_per_epoch * cfg.epochs;
  if (cfg.optim.total_steps <= 0) cfg.optim.total_steps = task.total_steps;
  validate_optim(cfg.optim);
  validate_task(task);
  return out;
}

RunResult train_one(const ExperimentConfig& cfg, const PreparedData& data, uint64_t seed,
                    const std::string& run_dir) {
  require(cfg.loss == "bce" || cfg.loss == "cce",
          "train_one: loss must be resolved by prepare_data first");
  std::filesystem::create_directories(run_dir);
  const auto t0 = std::chrono::steady_clock::now();

  ParamSet params;
  if (!cfg.init_from.empty()) {
    ParamSet loaded = load_params(cfg.init_from);
    for (const auto& name : loaded.names())
      if (name.rfind("gb.", 0) != 0) params.add(name, loaded.at(name));
  } else {
    params = init_host_params(cfg.model, cfg.host_seed);
  }
  add_gating_params(params, cfg.model, cfg.gating, seed);

  OptimState state = init_optim_state(params);
  const bool use_bce = cfg.loss == "bce";

  RunResult run;
  run.seed = seed;
  run.records_path = run_dir + "/records.jsonl";
  std::ofstream records(run.records_path, std::ios::binary | std::ios::trunc);
  require(records.good(), "train_one: cannot open " + run.records_path);

  const bool dump_gates = cfg.dump_gates &&
                          cfg.gating.variant != GatingVariant::NoGatingBlock &&
                          !cfg.gating.positions.empty();
  std::ofstream gates;
  if (dump_gates) {
    gates.open(run_dir + "/gates.jsonl", std::ios::binary | std::ios::trunc);
    require(gates.good(), "train_one: cannot open " + run_dir + "/gates.jsonl");
  }

  const std::vector<MiniBatch> val_batches = ordered_batches(data.val, cfg.batch_size);
  std::vector<int64_t> val_labels;
  val_labels.reserve(data.val.size());
  for (const auto& mb : val_batches)
    val_labels.insert(val_labels.end(), mb.labels.begin(), mb.labels.end());

  std::vector<std::vector<MetricValue>> epoch_metrics;

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<MiniBatch> batches =
        batch_iter(data.train, cfg.batch_size, seed, epoch);
    double loss_sum = 0.0;
    double last_lr = 0.0;
    for (const auto& mb : batches) {
      ad::Graph g;
      ForwardOptions opts;
      opts.train = true;
      opts.dropout_seed = seed;
      opts.dropout_step = static_cast<uint64_t>(state.t);
      ad::NodeId logits = model_forward_graph(g, params, cfg.model, cfg.gating, mb.batch, opts);
      ad::NodeId loss;
      if (use_bce) {
        Tensor targets = Tensor::zeros({mb.batch.batch, 1});
        for (int64_t b = 0; b < mb.batch.batch; ++b)
          targets.data[static_cast<size_t>(b)] = mb.labels[static_cast<size_t>(b)] ? 1.0 : 0.0;
        loss = g.bce_with_logits(logits, targets);
      } else {
        loss = g.softmax_xent(logits, mb.labels);
      }
      last_lr = cosine_lr(state.t, cfg.optim);
      ad::Gradients grads = g.backward(loss);
      adamw_step(params, grads, state, cfg.optim);
      loss_sum += g.value(loss).data[0];
    }

    std::vector<int64_t> preds;
    preds.reserve(data.val.size());
    for (const auto& mb : val_batches) {
      Tensor logits = model_forward(params, cfg.model, cfg.gating, mb.batch);
      for (int64_t b = 0; b < mb.batch.batch; ++b) {
        if (cfg.model.output_units == 1) {
          preds.push_back(logits.data[static_cast<size_t>(b)] >= 0.0 ? 1 : 0);
        } else {
          const double* row = logits.data.data() + b * cfg.model.output_units;
          int64_t arg = 0;
          for (int64_t c = 1; c < cfg.model.output_units; ++c)
            if (row[c] > row[arg]) arg = c;
          preds.push_back(arg);
        }
      }
    }

    EpochRecord rec;
    rec.seed = seed;
    rec.epoch = epoch;
    rec.lr = last_lr;
    rec.loss = batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
    double score_sum = 0.0;
    for (const auto& mname : data.task.metrics) {
      double v = eval_metric(mname, preds, val_labels, data.task);
      rec.metrics.push_back({mname, v});
      score_sum += v;
    }
    const double score = score_sum / static_cast<double>(data.task.metrics.size());

    records << epoch_record_json(rec) << "\n";
    require(records.good(), "train_one: write failed for " + run.records_path);
    epoch_metrics.push_back(rec.metrics);
    run.epochs.push_back(std::move(rec));

    if (dump_gates && !val_batches.empty()) {
      std::vector<GateTrace> trace;
      ForwardOptions opts;
      opts.trace = &trace;
      model_forward(params, cfg.model, cfg.gating, val_batches[0].batch, opts);
      for (const auto& t : trace) {
        json gj;
        gj["epoch"] = epoch;
        gj["position"] = t.position;
        json head = json::array();
        const int64_t n = std::min<int64_t>(16, t.value.numel());
        for (int64_t i = 0; i < n; ++i) head.push_back(t.value.data[static_cast<size_t>(i)]);
        gj["gate_head"] = head;
        gates << gj.dump() << "\n";
      }
    }

    if (cfg.early_stop_acc > 0.0 && score >= cfg.early_stop_acc) break;
  }

  run.best = best_epoch(epoch_metrics);

  if (cfg.save_params) save_params(params, run_dir + "/params.txt");

  const auto t1 = std::chrono::steady_clock::now();
  json meta;
  meta["best_epoch"] = run.best;
  meta["epochs_run"] = run.epochs.size();
  meta["wall_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  write_text_file(run_dir + "/meta.json", meta.dump(2) + "\n");
  return run;
}

std::vector<RunResult> cmd_train(ExperimentConfig cfg) {
  require(!cfg.out_dir.empty(), "config: out_dir is required for training commands");
  PreparedData data = prepare_data(cfg);
  const std::string vdir = cfg.out_dir + "/" + variant_name(cfg.gating.variant);
  std::filesystem::create_directories(vdir);
  write_text_file(vdir + "/config.cfg", serialize_config(cfg));
  std::vector<RunResult> runs;
  for (uint64_t seed : cfg.seeds)
    runs.push_back(train_one(cfg, data, seed, vdir + "/seed" + std::to_string(seed)));
  return runs;
}

std::vector<Cell> cells_from_runs(const std::string& dataset, const std::string& variant,
                                  const TaskSpec& task,
                                  const std::vector<RunResult>& runs) {
  require(!runs.empty(), "cells_from_runs: need at least one run");
  std::vector<Cell> cells;
  for (size_t m = 0; m < task.metrics.size(); ++m) {
    std::vector<double> values;
    values.reserve(runs.size());
    for (const auto& run : runs) {
      require(!run.epochs.empty(), "cells_from_runs: a run recorded no epochs");
      require(run.best >= 0 && run.best < static_cast<int64_t>(run.epochs.size()),
              "cells_from_runs: best epoch out of range");
      const EpochRecord& best = run.epochs[static_cast<size_t>(run.best)];
      require(m < best.metrics.size() && best.metrics[m].name == task.metrics[m],
              "cells_from_runs: record metrics do not match the task spec");
      values.push_back(best.metrics[m].value * 100.0);
    }
    cells.push_back({dataset, variant, task.metrics[m], dataset_mean(values),
                     sample_std(values)});
  }
  return cells;
}

SuiteReport cmd_ablation(ExperimentConfig cfg) {
  require(!cfg.out_dir.empty(), "config: out_dir is required for training commands");
  const GatingVariant variants[] = {GatingVariant::NoGatingBlock,
                                    GatingVariant::NeuromodulatedGating,
                                    GatingVariant::NonNeuromodulatedGating};
  std::vector<Cell> cells;
  for (GatingVariant v : variants) {
    ExperimentConfig vcfg = cfg;
    vcfg.gating.variant = v;
    if (v == GatingVariant::NoGatingBlock) vcfg.gating.positions.clear();
    ExperimentConfig probe = vcfg;
    PreparedData data = prepare_data(probe);
    std::vector<RunResult> runs = cmd_train(vcfg);
    append_cells(cells, cells_from_runs(vcfg.task, variant_name(v), data.task, runs));
  }
  return finish_report(cfg.out_dir, cells);
}

SuiteReport cmd_sweep(ExperimentConfig cfg) {
  require(!cfg.out_dir.empty(), "config: out_dir is required for training commands");
  const int64_t L = cfg.model.num_layers;
  const int64_t positions[2] = {sweep_start_position(L), sweep_end_position(L)};
  const char* tags[2] = {"start", "end"};
  std::vector<Cell> cells;
  for (int i = 0; i < 2; ++i) {
    const std::string label =
        std::string(tags[i]) + "_layer_" + std::to_string(positions[i]);
    ExperimentConfig vcfg = cfg;
    vcfg.gating.variant = GatingVariant::NeuromodulatedGating;
    vcfg.gating.positions = {positions[i]};
    vcfg.out_dir = cfg.out_dir + "/" + label;
    ExperimentConfig probe = vcfg;
    PreparedData data = prepare_data(probe);
    std::vector<RunResult> runs = cmd_train(vcfg);
    append_cells(cells, cells_from_runs(vcfg.task, label, data.task, runs));
  }
  return finish_report(cfg.out_dir, cells);
}

std::string cmd_paramcount(const ExperimentConfig& cfg) {
  ModelConfig model = cfg.model;
  require(model.vocab_size >= 1,
          "paramcount: the config must pin vocab_size (the large profile does)");
  validate_model(model);
  GatingConfig none;
  GatingConfig gated = cfg.gating;
  if (gated.variant == GatingVariant::NoGatingBlock)
    gated.variant = GatingVariant::NeuromodulatedGating;
  if (gated.positions.empty()) gated.positions = {sweep_end_position(model.num_layers)};
  GatingConfig non_neuro = gated;
  non_neuro.variant = GatingVariant::NonNeuromodulatedGating;

  const int64_t plain = param_count(model, none);
  const int64_t neuro = param_count(model, gated);
  const int64_t nn = param_count(model, non_neuro);
  std::ostringstream out;
  out << "no_gating_block     " << plain << "\n";
  out << "neuromodulated      " << neuro << "\n";
  out << "non_neuromodulated  " << nn << "\n";
  out << "gating_block_delta  " << (neuro - plain) << "\n";
  return out.str();
}

bool cmd_gradcheck(std::string* report_text) {
  ModelConfig model;
  model.vocab_size = 11;
  model.max_positions = 16;
  model.hidden = 8;
  model.num_layers = 2;
  model.heads = 2;
  model.intermediate = 16;
  model.output_units = 1;

  Batch batch;
  batch.batch = 2;
  batch.seq_len = 4;
  batch.tokens = {kClsId, 4, 5, kSepId, kClsId, 6, 7, kSepId};
  batch.mask = {1, 1, 1, 1, 1, 1, 1, 0};
  batch.segments = {0, 0, 0, 0, 0, 0, 0, 0};

  const GatingVariant variants[] = {GatingVariant::NoGatingBlock,
                                    GatingVariant::NeuromodulatedGating,
                                    GatingVariant::NonNeuromodulatedGating};
  std::ostringstream out;
  bool all_ok = true;
  for (GatingVariant v : variants) {
    GatingConfig gating;
    gating.variant = v;
    gating.gb_depth = 1;
    if (v != GatingVariant::NoGatingBlock) gating.positions = {1};

    ParamSet params = init_host_params(model, 91);
    add_gating_params(params, model, gating, 92);

    ad::Graph g;
    ForwardOptions opts;
    opts.train = true;
    opts.dropout_seed = 3;
    ad::NodeId logits = model_forward_graph(g, params, model, gating, batch, opts);
    // Down-scaled loss: finite-difference noise shrinks with it, keeping
    // structurally zero gradients under the comparison's absolute floor.
    ad::NodeId loss = g.scale(g.bce_with_logits(logits, Tensor({2, 1}, {1.0, 0.0})), 1e-3);
    ad::GradCheckReport rep = ad::grad_check(g, loss);

    char err[32];
    std::snprintf(err, sizeof err, "%.3g", rep.max_rel_err);
    out << variant_name(v) << ": max rel err " << err << " at "
        << (rep.worst_param.empty() ? "-" : rep.worst_param) << " over "
        << rep.coords_checked << " coords " << (rep.pass ? "[ok]" : "[FAIL]") << "\n";
    all_ok = all_ok && rep.pass;
  }
  if (report_text) *report_text = out.str();
  return all_ok;
}

SuiteReport cmd_aggregate_file(const std::string& csv_path) {
  return aggregate(parse_cells_csv(csv_path));
}

}  // namespace ngt
