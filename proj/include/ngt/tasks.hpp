// SPDX-License-Identifier: Apache-2.0
//
// Tokenization, synthetic task generators, SuperGLUE-format JSONL ingestion,
// and deterministic batching. The tokenizer is whitespace-plus-[UNK]; real
// subword vocabularies are out of scope for this lab.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ngt/model.hpp"

namespace ngt {

// Token ids 0..3 are reserved. Content ids start at 4, so a padding position
// is exactly "token id == kPadId" and attention masks are derived from that.
inline constexpr int64_t kPadId = 0;
inline constexpr int64_t kUnkId = 1;
inline constexpr int64_t kClsId = 2;
inline constexpr int64_t kSepId = 3;

class Vocab {
 public:
  Vocab();  // starts with [PAD], [UNK], [CLS], [SEP]

  // Inserts the token if new; returns its id either way. Reserved names map
  // to their fixed ids.
  int64_t add(const std::string& token);
  // Total lookup: unknown tokens resolve to [UNK].
  int64_t id(const std::string& token) const;
  const std::string& token(int64_t id) const;
  int64_t size() const { return static_cast<int64_t>(id_to_token_.size()); }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int64_t> token_to_id_;
};

// One encoded input: fixed-length token ids with segment ids and a label.
// group_id ties together the per-option rows of one multiple-choice question;
// choice_id is the option index within that group.
struct Example {
  std::vector<int64_t> tokens;
  std::vector<int64_t> segment_ids;
  int64_t label = 0;
  std::optional<int64_t> group_id;
  std::optional<int64_t> choice_id;
};

struct TaskSpec {
  std::string name;
  int64_t num_classes = 2;
  int64_t output_units = 1;  // 1 = sigmoid head, C = softmax head
  std::vector<std::string> metrics = {"acc"};
  bool multiple_choice = false;
  int64_t epochs = 1;
  int64_t total_steps = 0;  // 0 = derive from dataset size and epochs
};

void validate_task(const TaskSpec& spec);

std::vector<std::string> whitespace_tokenize(const std::string& text);

// Assembles [CLS] a [SEP] (b [SEP] when b is non-empty), truncating from the
// START of the content (never [CLS]) until it fits, then pads to max_len.
// Segment ids are 0 through the first [SEP], 1 afterwards, 0 on padding.
Example encode(const std::vector<std::string>& a, const std::vector<std::string>& b,
               const Vocab& vocab, int64_t max_len);

// Attention mask for an encoded example: 1.0 on real tokens, 0.0 on padding.
std::vector<double> attention_mask_of(const Example& ex);

enum class SuperGlueSchema { BoolQ, Cb, Rte };
SuperGlueSchema schema_from_name(const std::string& name);

// Scans a JSONL file and returns a vocabulary over its text fields.
Vocab vocab_from_superglue(const std::vector<std::string>& paths, SuperGlueSchema schema);

// One JSON object per line with the official field names. Labels map as
// boolq: true/false -> 1/0; cb: entailment/contradiction/neutral -> 0/1/2;
// rte: entailment/not_entailment -> 1/0.
std::vector<Example> load_superglue_jsonl(const std::string& path, SuperGlueSchema schema,
                                          const Vocab& vocab, int64_t max_len);

// A synthetic example keeps its surface tokens so datasets can be saved,
// inspected, and replayed as JSONL.
struct SyntheticExample {
  std::vector<std::string> tokens;
  int64_t label = 0;
  std::optional<int64_t> group_id;
  std::optional<int64_t> choice_id;
};

struct SyntheticDataset {
  std::string task;
  int64_t num_classes = 2;
  std::vector<SyntheticExample> examples;
};

// Balanced binary sequences over {A, B}; label 1 iff A is the majority.
// seq_len must be odd so there are no ties.
SyntheticDataset gen_majority(uint64_t seed, int64_t n_examples, int64_t seq_len);

// A pointer token P<p> followed by seq_len-1 symbol tokens; the label is the
// class index of the symbol at (1-based) position p. Exercises content that
// is only relevant conditional on another token.
SyntheticDataset gen_gated_copy(uint64_t seed, int64_t n_examples, int64_t seq_len,
                                int64_t n_symbols);

void save_synthetic_jsonl(const SyntheticDataset& ds, const std::string& path);
SyntheticDataset load_synthetic_jsonl(const std::string& path);

// Vocabulary over a synthetic dataset: reserved ids then the distinct surface
// tokens in sorted order, so it does not depend on example order.
Vocab vocab_for(const SyntheticDataset& ds);

std::vector<Example> encode_synthetic(const SyntheticDataset& ds, const Vocab& vocab,
                                      int64_t max_len);

// One training batch plus the bookkeeping the loop needs.
struct MiniBatch {
  Batch batch;
  std::vector<int64_t> labels;
  std::vector<int64_t> example_index;  // positions in the source dataset
};

// Shuffles with a Fisher-Yates pass seeded by (run_seed, epoch), keeping the
// rows of one multiple-choice group contiguous, then cuts into batches of
// batch_size with the final partial batch emitted.
std::vector<MiniBatch> batch_iter(const std::vector<Example>& data, int64_t batch_size,
                                  uint64_t run_seed, int64_t epoch);

// Dataset-order batches without shuffling, for evaluation passes.
std::vector<MiniBatch> ordered_batches(const std::vector<Example>& data, int64_t batch_size);

}  // namespace ngt
