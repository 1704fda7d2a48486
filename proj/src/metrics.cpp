// SPDX-License-Identifier: Apache-2.0

#include "ngt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ngt {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

void require_paired(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels,
                    const char* who) {
  require(!preds.empty(), std::string(who) + ": inputs must be non-empty");
  require(preds.size() == labels.size(),
          std::string(who) + ": preds and labels must have equal length");
}

double one_vs_rest_f1(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels,
                      int64_t cls) {
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    bool p = preds[i] == cls;
    bool g = labels[i] == cls;
    tp += (p && g) ? 1 : 0;
    fp += (p && !g) ? 1 : 0;
    fn += (!p && g) ? 1 : 0;
  }
  double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", round2(x));
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& path, int64_t line, const std::string& s) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail(path + ":" + std::to_string(line) + ": not a number: \"" + s + "\"");
  }
}

}  // namespace

double accuracy(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels) {
  require_paired(preds, labels, "accuracy");
  int64_t hit = 0;
  for (size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double f1_binary(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels) {
  require_paired(preds, labels, "f1_binary");
  for (size_t i = 0; i < preds.size(); ++i)
    require((preds[i] == 0 || preds[i] == 1) && (labels[i] == 0 || labels[i] == 1),
            "f1_binary: inputs must be 0/1");
  return one_vs_rest_f1(preds, labels, 1);
}

double f1_macro(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels,
                int64_t num_classes) {
  require_paired(preds, labels, "f1_macro");
  require(num_classes >= 2, "f1_macro: num_classes must be >= 2");
  for (size_t i = 0; i < preds.size(); ++i)
    require(preds[i] >= 0 && preds[i] < num_classes && labels[i] >= 0 &&
                labels[i] < num_classes,
            "f1_macro: class out of range");
  double sum = 0.0;
  for (int64_t c = 0; c < num_classes; ++c) sum += one_vs_rest_f1(preds, labels, c);
  return sum / static_cast<double>(num_classes);
}

double f1_token(const std::vector<std::string>& pred_tokens,
                const std::vector<std::string>& gold_tokens) {
  if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;
  if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;
  std::map<std::string, int64_t> gold_count;
  for (const auto& t : gold_tokens) ++gold_count[t];
  int64_t common = 0;
  for (const auto& t : pred_tokens) {
    auto it = gold_count.find(t);
    if (it != gold_count.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / static_cast<double>(pred_tokens.size());
  double recall = static_cast<double>(common) / static_cast<double>(gold_tokens.size());
  return 2.0 * precision * recall / (precision + recall);
}

int64_t max_choice_select(const std::vector<double>& option_scores) {
  require(!option_scores.empty(), "max_choice_select: no options");
  int64_t best = 0;
  for (int64_t i = 1; i < static_cast<int64_t>(option_scores.size()); ++i)
    if (option_scores[static_cast<size_t>(i)] > option_scores[static_cast<size_t>(best)])
      best = i;
  return best;
}

double em_grouped(const std::vector<int64_t>& preds, const std::vector<int64_t>& labels,
                  const std::vector<int64_t>& group_ids) {
  require_paired(preds, labels, "em_grouped");
  require(group_ids.size() == preds.size(),
          "em_grouped: group_ids must match preds in length");
  std::vector<int64_t> order;  // first-appearance order of the groups
  std::unordered_map<int64_t, bool> all_correct;
  for (size_t i = 0; i < preds.size(); ++i) {
    auto it = all_correct.find(group_ids[i]);
    if (it == all_correct.end()) {
      order.push_back(group_ids[i]);
      all_correct.emplace(group_ids[i], preds[i] == labels[i]);
    } else {
      it->second = it->second && preds[i] == labels[i];
    }
  }
  int64_t good = 0;
  for (int64_t g : order) good += all_correct.at(g) ? 1 : 0;
  return static_cast<double>(good) / static_cast<double>(order.size());
}

int64_t best_epoch(const std::vector<std::vector<MetricValue>>& epochs) {
  require(!epochs.empty(), "best_epoch: no epochs");
  int64_t best = 0;
  double best_score = 0.0;
  for (int64_t e = 0; e < static_cast<int64_t>(epochs.size()); ++e) {
    const auto& set = epochs[static_cast<size_t>(e)];
    require(!set.empty(), "best_epoch: an epoch has no metrics");
    double sum = 0.0;
    for (const auto& m : set) sum += m.value;
    double score = sum / static_cast<double>(set.size());
    if (e == 0 || score > best_score) {
      best = e;
      best_score = score;
    }
  }
  return best;
}

double dataset_mean(const std::vector<double>& values) {
  require(!values.empty(), "dataset_mean: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
  require(!values.empty(), "sample_std: no values");
  if (values.size() == 1) return 0.0;
  double mean = dataset_mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::pair<double, double> suite_mean_std(const std::vector<double>& dataset_means,
                                         const std::vector<double>& dataset_stds) {
  require(!dataset_means.empty(), "suite_mean_std: no datasets");
  require(dataset_means.size() == dataset_stds.size(),
          "suite_mean_std: means and stds must pair up");
  double mean = dataset_mean(dataset_means);
  double ss = 0.0;
  for (double s : dataset_stds) ss += s * s;
  double rms = std::sqrt(ss / static_cast<double>(dataset_stds.size()));
  return {mean, rms};
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

SuiteReport aggregate(const std::vector<Cell>& cells) {
  require(!cells.empty(), "aggregate: no cells");

  // first-appearance order of variants, and of datasets within each variant
  std::vector<std::string> variant_order;
  std::map<std::string, std::vector<std::string>> dataset_order;
  std::map<std::string, std::map<std::string, std::vector<const Cell*>>> grouped;
  for (const auto& c : cells) {
    auto& per_dataset = grouped[c.variant];
    if (per_dataset.empty() &&
        std::find(variant_order.begin(), variant_order.end(), c.variant) ==
            variant_order.end())
      variant_order.push_back(c.variant);
    auto& list = per_dataset[c.dataset];
    if (list.empty()) dataset_order[c.variant].push_back(c.dataset);
    for (const Cell* prev : list)
      require(prev->metric != c.metric, "aggregate: duplicate cell for " + c.dataset +
                                            "/" + c.variant + "/" + c.metric);
    list.push_back(&c);
  }

  SuiteReport report;
  for (const auto& variant : variant_order) {
    VariantReport vr;
    vr.variant = variant;
    // Sums run in name-sorted order so the result is bit-identical under any
    // permutation of the input cells; display order stays first-appearance.
    std::map<std::string, std::pair<double, double>> per_dataset;
    for (const auto& dataset : dataset_order[variant]) {
      DatasetRow row;
      row.dataset = dataset;
      std::map<std::string, const Cell*> by_metric;
      for (const Cell* c : grouped[variant][dataset]) {
        row.metrics.push_back(c->metric);
        by_metric.emplace(c->metric, c);
      }
      std::vector<double> means, stds;
      for (const auto& [name, c] : by_metric) {
        // suite arithmetic consumes the reported (rounded) numbers
        means.push_back(round2(c->mean));
        stds.push_back(round2(c->stdev));
      }
      row.mean = dataset_mean(means);
      row.stdev = dataset_mean(stds);
      per_dataset.emplace(dataset, std::make_pair(row.mean, row.stdev));
      vr.rows.push_back(std::move(row));
    }
    std::vector<double> ds_means, ds_stds;
    for (const auto& [name, ms] : per_dataset) {
      ds_means.push_back(ms.first);
      ds_stds.push_back(ms.second);
    }
    auto [m, s] = suite_mean_std(ds_means, ds_stds);
    vr.suite_mean = m;
    vr.suite_std = s;
    report.variants.push_back(std::move(vr));
  }
  return report;
}

std::vector<Cell> parse_cells_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics: cannot open " + path);
  std::string line;
  int64_t lineno = 0;
  bool aggregated_form = false;
  bool have_header = false;

  std::vector<Cell> cells;
  // raw form: per-(dataset, metric) run values in first-appearance order
  std::vector<std::pair<std::string, std::string>> raw_order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> raw_values;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (!have_header) {
      if (f == std::vector<std::string>{"dataset", "variant", "metric", "mean", "std"})
        aggregated_form = true;
      else if (f == std::vector<std::string>{"dataset", "metric", "run", "value"})
        aggregated_form = false;
      else
        fail(path + ":" + std::to_string(lineno) + ": unrecognized CSV header");
      have_header = true;
      continue;
    }
    if (aggregated_form) {
      if (f.size() != 5)
        fail(path + ":" + std::to_string(lineno) + ": expected 5 fields");
      Cell c;
      c.dataset = f[0];
      c.variant = f[1];
      c.metric = f[2];
      c.mean = parse_number(path, lineno, f[3]);
      c.stdev = parse_number(path, lineno, f[4]);
      cells.push_back(std::move(c));
    } else {
      if (f.size() != 4)
        fail(path + ":" + std::to_string(lineno) + ": expected 4 fields");
      std::pair<std::string, std::string> key{f[0], f[1]};
      auto it = raw_values.find(key);
      if (it == raw_values.end()) {
        raw_order.push_back(key);
        it = raw_values.emplace(key, std::vector<double>{}).first;
      }
      it->second.push_back(parse_number(path, lineno, f[3]));
    }
  }
  require(have_header, "metrics: " + path + " is empty");

  if (!aggregated_form) {
    for (const auto& key : raw_order) {
      Cell c;
      c.dataset = key.first;
      c.variant = "all";
      c.metric = key.second;
      c.mean = dataset_mean(raw_values[key]);
      c.stdev = sample_std(raw_values[key]);
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

std::string cells_csv(const std::vector<Cell>& cells) {
  std::ostringstream out;
  out << "dataset,variant,metric,mean,std\n";
  for (const auto& c : cells)
    out << c.dataset << "," << c.variant << "," << c.metric << "," << fmt2(c.mean) << ","
        << fmt2(c.stdev) << "\n";
  return out.str();
}

std::string render_suite_table(const SuiteReport& report) {
  require(!report.variants.empty(), "render_suite_table: empty report");

  // row keys: dataset order of the first variant, extended by any extras
  std::vector<std::string> datasets;
  for (const auto& vr : report.variants)
    for (const auto& row : vr.rows)
      if (std::find(datasets.begin(), datasets.end(), row.dataset) == datasets.end())
        datasets.push_back(row.dataset);

  auto cell_text = [](const VariantReport& vr, const std::string& dataset,
                      std::string* metrics) -> std::string {
    for (const auto& row : vr.rows) {
      if (row.dataset != dataset) continue;
      if (metrics) {
        std::string joined;
        for (const auto& m : row.metrics) joined += (joined.empty() ? "" : "/") + m;
        *metrics = joined;
      }
      return fmt2(row.mean) + " +- " + fmt2(row.stdev);
    }
    return "-";
  };

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header = {"dataset", "metrics"};
  for (const auto& vr : report.variants) header.push_back(vr.variant);
  grid.push_back(header);
  for (const auto& dataset : datasets) {
    std::vector<std::string> row = {dataset, ""};
    for (const auto& vr : report.variants) {
      std::string metrics;
      row.push_back(cell_text(vr, dataset, row[1].empty() ? &metrics : nullptr));
      if (row[1].empty() && !metrics.empty()) row[1] = metrics;
    }
    grid.push_back(std::move(row));
  }
  std::vector<std::string> mean_row = {"mean", ""};
  for (const auto& vr : report.variants)
    mean_row.push_back(fmt2(vr.suite_mean) + " +- " + fmt2(vr.suite_std));
  grid.push_back(std::move(mean_row));

  std::vector<size_t> width(grid[0].size(), 0);
  for (const auto& row : grid)
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  for (const auto& row : grid) {
    for (size_t c = 0; c < row.size(); ++c) {
      out << row[c];
      if (c + 1 < row.size())
        out << std::string(width[c] - row[c].size() + 2, ' ');
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace ngt
