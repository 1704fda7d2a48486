// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ngt/harness.hpp"

namespace {

struct CommonFlags {
  CLI::Option* config = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* dump_gates = nullptr;
};

struct CliState {
  std::string config_path;
  uint64_t seed = 0;
  std::string out_dir;
  bool dump_gates = false;
};

CommonFlags add_common(CLI::App* cmd, CliState& st) {
  CommonFlags f;
  f.config = cmd->add_option("--config", st.config_path, "key=value config file");
  f.seed = cmd->add_option("--seed", st.seed, "run a single seed instead of the config's list");
  f.out = cmd->add_option("--out", st.out_dir, "output directory (overrides out_dir)");
  f.dump_gates = cmd->add_flag("--dump-gates", st.dump_gates,
                               "write per-epoch gate samples next to the records");
  return f;
}

ngt::ExperimentConfig effective_config(const CliState& st, const CommonFlags& f,
                                       const std::string& default_profile) {
  ngt::ExperimentConfig cfg;
  if (f.config->count() > 0) {
    cfg = ngt::parse_config_file(st.config_path);
  } else {
    ngt::apply_profile(cfg, default_profile);
  }
  if (f.seed->count() > 0) cfg.seeds = {st.seed};
  if (f.out->count() > 0) cfg.out_dir = st.out_dir;
  if (st.dump_gates) cfg.dump_gates = true;
  return cfg;
}

void print_runs(const std::vector<ngt::RunResult>& runs) {
  for (const auto& run : runs) {
    const ngt::EpochRecord& best = run.epochs[static_cast<size_t>(run.best)];
    std::printf("seed %llu: %zu epochs, best epoch %lld:",
                static_cast<unsigned long long>(run.seed), run.epochs.size(),
                static_cast<long long>(run.best));
    for (const auto& m : best.metrics) std::printf(" %s=%.2f", m.name.c_str(), m.value * 100.0);
    std::printf("  (records: %s)\n", run.records_path.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gated-transformer experiment lab"};
  app.require_subcommand(1);
  CliState st;
  std::string csv_path;

  CLI::App* train = app.add_subcommand("train", "train the configured variant, one run per seed");
  CommonFlags train_f = add_common(train, st);

  CLI::App* ablation = app.add_subcommand("ablation", "train all three variants and aggregate");
  CommonFlags ablation_f = add_common(ablation, st);

  CLI::App* sweep = app.add_subcommand("sweep", "train the gated model at the early and late insertion points");
  CommonFlags sweep_f = add_common(sweep, st);

  CLI::App* paramcount = app.add_subcommand("paramcount", "parameter counts per variant (defaults to the large BERT-scale profile)");
  CommonFlags paramcount_f = add_common(paramcount, st);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check on tiny instances of every variant");
  add_common(gradcheck, st);

  CLI::App* aggregate_cmd = app.add_subcommand("aggregate", "aggregate a cells CSV into the suite report");
  aggregate_cmd->add_option("csv", csv_path, "summary or raw per-run CSV")->required();

  CLI::App* report = app.add_subcommand("report", "render the report for an existing output directory");
  CommonFlags report_f = add_common(report, st);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      print_runs(ngt::cmd_train(effective_config(st, train_f, "toy")));
      return 0;
    }
    if (ablation->parsed()) {
      ngt::SuiteReport rep = ngt::cmd_ablation(effective_config(st, ablation_f, "toy"));
      std::fputs(ngt::render_suite_table(rep).c_str(), stdout);
      return 0;
    }
    if (sweep->parsed()) {
      ngt::SuiteReport rep = ngt::cmd_sweep(effective_config(st, sweep_f, "toy"));
      std::fputs(ngt::render_suite_table(rep).c_str(), stdout);
      return 0;
    }
    if (paramcount->parsed()) {
      std::fputs(ngt::cmd_paramcount(effective_config(st, paramcount_f, "large")).c_str(),
                 stdout);
      return 0;
    }
    if (gradcheck->parsed()) {
      std::string text;
      bool ok = ngt::cmd_gradcheck(&text);
      std::fputs(text.c_str(), stdout);
      return ok ? 0 : 1;
    }
    if (aggregate_cmd->parsed()) {
      std::vector<ngt::Cell> cells = ngt::parse_cells_csv(csv_path);
      std::fputs(ngt::cells_csv(cells).c_str(), stdout);
      std::fputs("\n", stdout);
      std::fputs(ngt::render_suite_table(ngt::aggregate(cells)).c_str(), stdout);
      return 0;
    }
    if (report->parsed()) {
      ngt::ExperimentConfig cfg = effective_config(st, report_f, "toy");
      if (cfg.out_dir.empty())
        throw std::invalid_argument("report: pass --out or a config with out_dir");
      std::vector<ngt::Cell> cells = ngt::parse_cells_csv(cfg.out_dir + "/summary.csv");
      std::fputs(ngt::render_suite_table(ngt::aggregate(cells)).c_str(), stdout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
