// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner: flat key=value configuration with named profiles, the
// training loop, multi-seed repetition, variant ablations, the insertion
// position sweep, and report emission.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ngt/metrics.hpp"
#include "ngt/model.hpp"
#include "ngt/optim.hpp"
#include "ngt/tasks.hpp"

namespace ngt {

// Everything a run needs, assembled from a profile plus key=value overrides.
// Dimensions that depend on the data (vocabulary size, output units, position
// table) are filled in by prepare_data.
struct ExperimentConfig {
  std::string profile = "toy";
  std::string task = "majority";  // majority | gated_copy | boolq | cb | rte
  ModelConfig model;
  GatingConfig gating;
  OptimConfig optim;
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::string out_dir;
  int64_t max_len = 32;
  int64_t batch_size = 8;
  int64_t epochs = 20;
  std::string loss = "auto";  // auto | bce | cce
  // synthetic data
  uint64_t data_seed = 7;
  int64_t n_train = 2000;
  int64_t n_val = 500;
  int64_t seq_len = 15;
  int64_t n_symbols = 5;
  // JSONL data
  std::string train_jsonl;
  std::string val_jsonl;
  // training controls
  double early_stop_acc = 0.0;  // stop once the epoch score reaches this; 0 = off
  uint64_t host_seed = 0;       // host weights are shared across run seeds
  std::string init_from;        // host parameters from file; gating stays fresh
  bool dump_gates = false;
  bool save_params = false;
};

// Base settings by name: "toy" is the desk-scale shape, "large" the
// BERT-large-cased shape (used for counting, not for training here).
void apply_profile(ExperimentConfig& cfg, const std::string& name);

// Flat key=value text: one pair per line, # comments, unknown keys rejected.
// A profile key, when present, is applied first regardless of position.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical echo of the effective configuration; parsing it back yields the
// same configuration.
std::string serialize_config(const ExperimentConfig& cfg);

// Cross-field checks that must hold before any training starts, including
// the loss/output-units pairing.
void validate_experiment(const ExperimentConfig& cfg);

struct PreparedData {
  TaskSpec task;
  Vocab vocab;
  std::vector<Example> train;
  std::vector<Example> val;
};

// Generates or loads the dataset and completes the model config (vocabulary
// size, output units, position table length).
PreparedData prepare_data(ExperimentConfig& cfg);

struct EpochRecord {
  uint64_t seed = 0;
  int64_t epoch = 0;
  double lr = 0.0;       // rate at the last optimizer step of the epoch
  double loss = 0.0;     // mean training loss over the epoch
  std::vector<MetricValue> metrics;  // validation, values in [0, 1]
};

struct RunResult {
  uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  int64_t best = 0;  // best-epoch index per the averaged-metric rule
  std::string records_path;
};

// One seed: fresh (or loaded) host weights, fresh gating weights, the
// epochs-by-batches loop, per-epoch validation, records.jsonl emission.
RunResult train_one(const ExperimentConfig& cfg, const PreparedData& data, uint64_t seed,
                    const std::string& run_dir);

// All seeds of the configured variant; writes under out_dir/<variant>/.
std::vector<RunResult> cmd_train(ExperimentConfig cfg);

// Per-metric cells (percentage scale) from the best epoch of each run.
std::vector<Cell> cells_from_runs(const std::string& dataset, const std::string& variant,
                                  const TaskSpec& task,
                                  const std::vector<RunResult>& runs);

// Trains all three variants on the same task and seeds; writes summary.csv
// and report.txt under out_dir and returns the aggregated report.
SuiteReport cmd_ablation(ExperimentConfig cfg);

// Trains the neuromodulated variant at the sweep start and end positions and
// reports them side by side.
SuiteReport cmd_sweep(ExperimentConfig cfg);

// Parameter counts for the three variants plus the gating delta.
std::string cmd_paramcount(const ExperimentConfig& cfg);

// Gradient check on a tiny two-layer instance of each variant; returns true
// when every variant passes, with one line per variant in *report_text.
bool cmd_gradcheck(std::string* report_text);

// Aggregates a cells CSV (either supported header) into a suite report.
SuiteReport cmd_aggregate_file(const std::string& csv_path);

}  // namespace ngt
