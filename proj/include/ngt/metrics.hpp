// SPDX-License-Identifier: Apache-2.0
//
// Metric functions, best-epoch selection, and the aggregation arithmetic that
// turns per-dataset scores into a suite report. Metric values live in [0, 1];
// the percentage scale and two-decimal rounding appear only at reporting.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ngt {

struct MetricValue {
  std::string name;
  double value = 0.0;  // in [0, 1]
};

double accuracy(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels);

// Positive class is 1; returns 0 when precision + recall is 0.
double f1_binary(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels);

// Unweighted mean of one-vs-rest F1 over all num_classes classes; a class
// absent from both preds and labels contributes 0.
double f1_macro(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels,
                int64_t num_classes);

// Bag-of-tokens overlap F1. Two empty bags count as a match (1.0); one empty
// bag scores 0.
double f1_token(const std::vector<std::string>& pred_tokens,
                const std::vector<std::string>& gold_tokens);

// Index of the highest-scoring option; ties resolve to the lowest index.
int64_t max_choice_select(const std::vector<double>& option_scores);

// Fraction of groups whose every row is predicted correctly.
double em_grouped(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels,
                  const std::vector<int64_t>& group_ids);

// Epoch whose metric-set average is highest; ties resolve to the earliest.
int64_t best_epoch(const std::vector<std::vector<MetricValue>>& epochs);

// Arithmetic mean of the metric scores reported for one dataset.
double dataset_mean(const std::vector<double>& values);

// Sample standard deviation (n - 1 denominator); a single value has spread 0.
double sample_std(const std::vector<double>& values);

// Suite row: plain mean of the per-dataset means, and the root mean square of
// the per-dataset standard deviations.
std::pair<double, double> suite_mean_std(const std::vector<double>& dataset_means,
                                         const std::vector<double>& dataset_stds);

// Half-away-from-zero rounding to two decimals, the reporting precision.
double round2(double x);

// One aggregated score: a (dataset, variant, metric) cell with its mean and
// standard deviation over runs, on the percentage scale.
struct Cell {
  std::string dataset;
  std::string variant;
  std::string metric;
  double mean = 0.0;
  double stdev = 0.0;
};

struct DatasetRow {
  std::string dataset;
  std::vector<std::string> metrics;
  double mean = 0.0;   // metric means averaged
  double stdev = 0.0;  // metric stds averaged
};

struct VariantReport {
  std::string variant;
  std::vector<DatasetRow> rows;
  double suite_mean = 0.0;
  double suite_std = 0.0;
};

struct SuiteReport {
  std::vector<VariantReport> variants;
};

// Rounds every cell to two decimals first (reported numbers are the input to
// the suite arithmetic), averages metrics within a dataset, then computes the
// suite row per variant. Order follows first appearance in the cell list.
SuiteReport aggregate(const std::vector<Cell>& cells);

// Reads either of the two supported headers:
//   dataset,variant,metric,mean,std   (already aggregated over runs)
//   dataset,metric,run,value          (raw per-run values; aggregated here
//                                      with sample_std, variant "all")
// Values are on the percentage scale. Fields must not contain commas.
std::vector<Cell> parse_cells_csv(const std::string& path);

// The summary CSV form with header dataset,variant,metric,mean,std.
std::string cells_csv(const std::vector<Cell>& cells);

// Fixed-width ASCII table, one row per dataset plus the mean row.
std::string render_suite_table(const SuiteReport& report);

}  // namespace ngt
