// SPDX-License-Identifier: Apache-2.0

#include "ngt/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "ngt/rng.hpp"

namespace ngt {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

[[noreturn]] void fail_at(const std::string& path, int64_t line, const std::string& msg) {
  fail(path + ":" + std::to_string(line) + ": " + msg);
}

struct SuperGlueRecord {
  std::vector<std::string> a;
  std::vector<std::string> b;
  int64_t label = 0;
};

int64_t map_label(const std::string& path, int64_t line, SuperGlueSchema schema,
                  const json& v) {
  switch (schema) {
    case SuperGlueSchema::BoolQ:
      if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
      fail_at(path, line, "boolq label must be a JSON boolean");
    case SuperGlueSchema::Cb: {
      if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "entailment") return 0;
        if (s == "contradiction") return 1;
        if (s == "neutral") return 2;
      }
      fail_at(path, line, "unknown cb label " + v.dump());
    }
    case SuperGlueSchema::Rte: {
      if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "entailment") return 1;
        if (s == "not_entailment") return 0;
      }
      fail_at(path, line, "unknown rte label " + v.dump());
    }
  }
  fail_at(path, line, "unknown schema");
}

std::string field_text(const std::string& path, int64_t line, const json& obj,
                       const char* key) {
  if (!obj.contains(key) || !obj[key].is_string())
    fail_at(path, line, std::string("missing or non-string field \"") + key + "\"");
  return obj[key].get<std::string>();
}

// Shared line-by-line walk so the vocabulary scan and the loader agree on
// parsing and error reporting.
template <class Fn>
void for_each_record(const std::string& path, SuperGlueSchema schema, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("tasks: cannot open " + path);
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      fail_at(path, lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) fail_at(path, lineno, "line is not a JSON object");
    SuperGlueRecord rec;
    if (schema == SuperGlueSchema::BoolQ) {
      rec.a = whitespace_tokenize(field_text(path, lineno, obj, "question"));
      rec.b = whitespace_tokenize(field_text(path, lineno, obj, "passage"));
    } else {
      rec.a = whitespace_tokenize(field_text(path, lineno, obj, "premise"));
      rec.b = whitespace_tokenize(field_text(path, lineno, obj, "hypothesis"));
    }
    if (!obj.contains("label")) fail_at(path, lineno, "missing field \"label\"");
    rec.label = map_label(path, lineno, schema, obj["label"]);
    fn(rec);
  }
}

}  // namespace

Vocab::Vocab() {
  id_to_token_ = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (size_t i = 0; i < id_to_token_.size(); ++i)
    token_to_id_.emplace(id_to_token_[i], static_cast<int64_t>(i));
}

int64_t Vocab::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  int64_t id = size();
  id_to_token_.push_back(token);
  token_to_id_.emplace(token, id);
  return id;
}

int64_t Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(int64_t id) const {
  require(id >= 0 && id < size(), "vocab: id out of range");
  return id_to_token_[static_cast<size_t>(id)];
}

void validate_task(const TaskSpec& spec) {
  require(!spec.name.empty(), "task spec: name must be non-empty");
  require(spec.num_classes >= 2, "task spec: num_classes must be >= 2");
  require(spec.output_units == 1 || spec.output_units == spec.num_classes,
          "task spec: output_units must be 1 or num_classes");
  require(spec.output_units != 1 || spec.num_classes == 2 || spec.multiple_choice,
          "task spec: a single output unit needs binary labels or multiple choice");
  require(!spec.metrics.empty(), "task spec: metric set must be non-empty");
  require(spec.epochs >= 0, "task spec: epochs must be >= 0");
  require(spec.total_steps >= 0, "task spec: total_steps must be >= 0");
}

std::vector<std::string> whitespace_tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Example encode(const std::vector<std::string>& a, const std::vector<std::string>& b,
               const Vocab& vocab, int64_t max_len) {
  require(max_len >= 3, "encode: max_len must be >= 3");
  Example ex;
  ex.tokens.push_back(kClsId);
  ex.segment_ids.push_back(0);
  for (const auto& t : a) {
    ex.tokens.push_back(vocab.id(t));
    ex.segment_ids.push_back(0);
  }
  ex.tokens.push_back(kSepId);
  ex.segment_ids.push_back(0);
  if (!b.empty()) {
    for (const auto& t : b) {
      ex.tokens.push_back(vocab.id(t));
      ex.segment_ids.push_back(1);
    }
    ex.tokens.push_back(kSepId);
    ex.segment_ids.push_back(1);
  }
  if (static_cast<int64_t>(ex.tokens.size()) > max_len) {
    // Content is truncated from its start; [CLS] always survives.
    int64_t drop = static_cast<int64_t>(ex.tokens.size()) - max_len;
    ex.tokens.erase(ex.tokens.begin() + 1, ex.tokens.begin() + 1 + drop);
    ex.segment_ids.erase(ex.segment_ids.begin() + 1, ex.segment_ids.begin() + 1 + drop);
  }
  while (static_cast<int64_t>(ex.tokens.size()) < max_len) {
    ex.tokens.push_back(kPadId);
    ex.segment_ids.push_back(0);
  }
  return ex;
}

std::vector<double> attention_mask_of(const Example& ex) {
  std::vector<double> mask(ex.tokens.size());
  for (size_t i = 0; i < ex.tokens.size(); ++i)
    mask[i] = ex.tokens[i] == kPadId ? 0.0 : 1.0;
  return mask;
}

SuperGlueSchema schema_from_name(const std::string& name) {
  if (name == "boolq") return SuperGlueSchema::BoolQ;
  if (name == "cb") return SuperGlueSchema::Cb;
  if (name == "rte") return SuperGlueSchema::Rte;
  fail("tasks: unknown schema " + name + " (expected boolq, cb, or rte)");
}

Vocab vocab_from_superglue(const std::vector<std::string>& paths, SuperGlueSchema schema) {
  Vocab vocab;
  for (const auto& path : paths) {
    for_each_record(path, schema, [&](const SuperGlueRecord& rec) {
      for (const auto& t : rec.a) vocab.add(t);
      for (const auto& t : rec.b) vocab.add(t);
    });
  }
  return vocab;
}

std::vector<Example> load_superglue_jsonl(const std::string& path, SuperGlueSchema schema,
                                          const Vocab& vocab, int64_t max_len) {
  std::vector<Example> out;
  for_each_record(path, schema, [&](const SuperGlueRecord& rec) {
    Example ex = encode(rec.a, rec.b, vocab, max_len);
    ex.label = rec.label;
    out.push_back(std::move(ex));
  });
  return out;
}

SyntheticDataset gen_majority(uint64_t seed, int64_t n_examples, int64_t seq_len) {
  require(n_examples >= 1, "gen_majority: n_examples must be >= 1");
  require(seq_len >= 1 && seq_len % 2 == 1, "gen_majority: seq_len must be odd");
  SyntheticDataset ds;
  ds.task = "majority";
  ds.num_classes = 2;
  Rng rng = Rng::stream(seed, "gen.majority");
  for (int64_t i = 0; i < n_examples; ++i) {
    int64_t target = (i % 2 == 0) ? 1 : 0;  // alternation keeps classes balanced
    std::vector<std::string> tokens(static_cast<size_t>(seq_len));
    int64_t count_a = 0;
    for (auto& t : tokens) {
      bool is_a = rng.below(2) == 0;
      count_a += is_a ? 1 : 0;
      t = is_a ? "A" : "B";
    }
    // Swapping A and B flips the majority, so the draw stays uniform within
    // the target class and odd length rules out ties.
    int64_t got = count_a * 2 > seq_len ? 1 : 0;
    if (got != target)
      for (auto& t : tokens) t = (t == "A") ? "B" : "A";
    SyntheticExample ex;
    ex.tokens = std::move(tokens);
    ex.label = target;
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

SyntheticDataset gen_gated_copy(uint64_t seed, int64_t n_examples, int64_t seq_len,
                                int64_t n_symbols) {
  require(n_examples >= 1, "gen_gated_copy: n_examples must be >= 1");
  require(seq_len >= 3, "gen_gated_copy: seq_len must be >= 3");
  require(n_symbols >= 2, "gen_gated_copy: n_symbols must be >= 2");
  SyntheticDataset ds;
  ds.task = "gated_copy";
  ds.num_classes = n_symbols;
  Rng rng = Rng::stream(seed, "gen.gated_copy");
  for (int64_t i = 0; i < n_examples; ++i) {
    int64_t p = 1 + rng.below(seq_len - 1);
    SyntheticExample ex;
    ex.tokens.push_back("P" + std::to_string(p));
    for (int64_t j = 1; j < seq_len; ++j) {
      int64_t sym = rng.below(n_symbols);
      ex.tokens.push_back("S" + std::to_string(sym + 1));
      if (j == p) ex.label = sym;
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

void save_synthetic_jsonl(const SyntheticDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("tasks: cannot write " + path);
  for (const auto& ex : ds.examples) {
    json j;
    j["tokens"] = ex.tokens;
    j["label"] = ex.label;
    j["group"] = ex.group_id ? json(*ex.group_id) : json(nullptr);
    j["choice"] = ex.choice_id ? json(*ex.choice_id) : json(nullptr);
    out << j.dump() << "\n";
  }
}

SyntheticDataset load_synthetic_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("tasks: cannot open " + path);
  SyntheticDataset ds;
  ds.task = "replay";
  std::string line;
  int64_t lineno = 0;
  int64_t max_label = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      fail_at(path, lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.contains("tokens") || !obj["tokens"].is_array() || !obj.contains("label"))
      fail_at(path, lineno, "expected fields tokens (array) and label");
    SyntheticExample ex;
    for (const auto& t : obj["tokens"]) {
      if (!t.is_string()) fail_at(path, lineno, "tokens must be strings");
      ex.tokens.push_back(t.get<std::string>());
    }
    ex.label = obj["label"].get<int64_t>();
    if (obj.contains("group") && !obj["group"].is_null())
      ex.group_id = obj["group"].get<int64_t>();
    if (obj.contains("choice") && !obj["choice"].is_null())
      ex.choice_id = obj["choice"].get<int64_t>();
    max_label = std::max(max_label, ex.label);
    ds.examples.push_back(std::move(ex));
  }
  ds.num_classes = std::max<int64_t>(2, max_label + 1);
  return ds;
}

Vocab vocab_for(const SyntheticDataset& ds) {
  std::set<std::string> tokens;
  for (const auto& ex : ds.examples) tokens.insert(ex.tokens.begin(), ex.tokens.end());
  Vocab vocab;
  for (const auto& t : tokens) vocab.add(t);
  return vocab;
}

std::vector<Example> encode_synthetic(const SyntheticDataset& ds, const Vocab& vocab,
                                      int64_t max_len) {
  std::vector<Example> out;
  out.reserve(ds.examples.size());
  for (const auto& src : ds.examples) {
    Example ex = encode(src.tokens, {}, vocab, max_len);
    ex.label = src.label;
    ex.group_id = src.group_id;
    ex.choice_id = src.choice_id;
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

void check_uniform_length(const std::vector<Example>& data, const char* who) {
  const size_t seq_len = data[0].tokens.size();
  for (const auto& ex : data) {
    require(ex.tokens.size() == seq_len && ex.segment_ids.size() == ex.tokens.size(),
            std::string(who) + ": examples must share one encoded length");
  }
}

std::vector<MiniBatch> cut_batches(const std::vector<Example>& data,
                                   const std::vector<int64_t>& order, int64_t batch_size) {
  const int64_t seq_len = static_cast<int64_t>(data[0].tokens.size());
  std::vector<MiniBatch> out;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
    size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
    MiniBatch mb;
    mb.batch.batch = static_cast<int64_t>(end - start);
    mb.batch.seq_len = seq_len;
    for (size_t k = start; k < end; ++k) {
      const Example& ex = data[static_cast<size_t>(order[k])];
      mb.batch.tokens.insert(mb.batch.tokens.end(), ex.tokens.begin(), ex.tokens.end());
      mb.batch.segments.insert(mb.batch.segments.end(), ex.segment_ids.begin(),
                               ex.segment_ids.end());
      std::vector<double> mask = attention_mask_of(ex);
      mb.batch.mask.insert(mb.batch.mask.end(), mask.begin(), mask.end());
      mb.labels.push_back(ex.label);
      mb.example_index.push_back(order[k]);
    }
    out.push_back(std::move(mb));
  }
  return out;
}

}  // namespace

std::vector<MiniBatch> batch_iter(const std::vector<Example>& data, int64_t batch_size,
                                  uint64_t run_seed, int64_t epoch) {
  require(batch_size >= 1, "batch_iter: batch_size must be >= 1");
  require(epoch >= 0, "batch_iter: epoch must be >= 0");
  if (data.empty()) return {};
  check_uniform_length(data, "batch_iter");

  // Group rows by group id (singletons when unset) so the options of one
  // question travel together through the shuffle.
  std::vector<std::vector<int64_t>> groups;
  std::unordered_map<int64_t, size_t> group_slot;
  for (int64_t i = 0; i < static_cast<int64_t>(data.size()); ++i) {
    if (data[static_cast<size_t>(i)].group_id) {
      int64_t gid = *data[static_cast<size_t>(i)].group_id;
      auto it = group_slot.find(gid);
      if (it == group_slot.end()) {
        group_slot.emplace(gid, groups.size());
        groups.push_back({i});
      } else {
        groups[it->second].push_back(i);
      }
    } else {
      groups.push_back({i});
    }
  }
  Rng rng = Rng::stream(run_seed, "shuffle", static_cast<uint64_t>(epoch));
  fisher_yates(groups, rng);
  std::vector<int64_t> order;
  order.reserve(data.size());
  for (const auto& g : groups) order.insert(order.end(), g.begin(), g.end());

  return cut_batches(data, order, batch_size);
}

std::vector<MiniBatch> ordered_batches(const std::vector<Example>& data, int64_t batch_size) {
  require(batch_size >= 1, "ordered_batches: batch_size must be >= 1");
  if (data.empty()) return {};
  check_uniform_length(data, "ordered_batches");
  std::vector<int64_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  return cut_batches(data, order, batch_size);
}

}  // namespace ngt
