// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngt/tasks.hpp"

using ngt::Example;
using ngt::SyntheticDataset;
using ngt::Vocab;

namespace {

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << "\n";
}

Vocab small_vocab() {
  Vocab v;
  for (const char* t : {"t1", "t2", "t3", "t4", "t5", "t6", "x", "y", "z"}) v.add(t);
  return v;
}

}  // namespace

TEST_CASE("vocabulary reserves the special ids and maps unknowns to UNK") {
  Vocab v;
  CHECK(v.size() == 4);
  CHECK(v.id("[PAD]") == ngt::kPadId);
  CHECK(v.id("[UNK]") == ngt::kUnkId);
  CHECK(v.id("[CLS]") == ngt::kClsId);
  CHECK(v.id("[SEP]") == ngt::kSepId);
  int64_t id = v.add("hello");
  CHECK(id == 4);
  CHECK(v.add("hello") == 4);  // idempotent
  CHECK(v.id("hello") == 4);
  CHECK(v.id("never-seen") == ngt::kUnkId);
  CHECK(v.token(4) == "hello");
  CHECK_THROWS_AS(v.token(99), std::invalid_argument);
}

TEST_CASE("whitespace tokenizer splits on runs of any whitespace") {
  CHECK(ngt::whitespace_tokenize("a b  c\t d\n") ==
        std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(ngt::whitespace_tokenize("").empty());
  CHECK(ngt::whitespace_tokenize("  \t ").empty());
  CHECK(ngt::whitespace_tokenize("one") == std::vector<std::string>{"one"});
}

TEST_CASE("encode assembles, truncates from the start, and pads") {
  Vocab v = small_vocab();

  SUBCASE("too-long content keeps CLS and drops the oldest tokens") {
    Example ex = ngt::encode({"t1", "t2", "t3", "t4", "t5", "t6"}, {}, v, 6);
    CHECK(ex.tokens == std::vector<int64_t>{ngt::kClsId, v.id("t3"), v.id("t4"),
                                            v.id("t5"), v.id("t6"), ngt::kSepId});
  }
  SUBCASE("short content is right-padded and the mask is ones then zeros") {
    Example ex = ngt::encode({"t1", "t2"}, {}, v, 7);
    CHECK(ex.tokens == std::vector<int64_t>{ngt::kClsId, v.id("t1"), v.id("t2"),
                                            ngt::kSepId, ngt::kPadId, ngt::kPadId,
                                            ngt::kPadId});
    CHECK(ngt::attention_mask_of(ex) ==
          std::vector<double>{1, 1, 1, 1, 0, 0, 0});
  }
  SUBCASE("empty text degenerates to CLS SEP padding") {
    Example ex = ngt::encode({}, {}, v, 4);
    CHECK(ex.tokens ==
          std::vector<int64_t>{ngt::kClsId, ngt::kSepId, ngt::kPadId, ngt::kPadId});
  }
  SUBCASE("second segment gets segment id 1 through its separator") {
    Example ex = ngt::encode({"x"}, {"y", "z"}, v, 8);
    CHECK(ex.tokens == std::vector<int64_t>{ngt::kClsId, v.id("x"), ngt::kSepId,
                                            v.id("y"), v.id("z"), ngt::kSepId,
                                            ngt::kPadId, ngt::kPadId});
    CHECK(ex.segment_ids == std::vector<int64_t>{0, 0, 0, 1, 1, 1, 0, 0});
  }
  SUBCASE("unknown words map to UNK") {
    Example ex = ngt::encode({"martian"}, {}, v, 4);
    CHECK(ex.tokens[1] == ngt::kUnkId);
  }
  SUBCASE("output length is always exactly max_len with a contiguous mask") {
    for (int64_t n : {0, 1, 3, 9, 20}) {
      std::vector<std::string> words(static_cast<size_t>(n), "t1");
      Example ex = ngt::encode(words, {}, v, 10);
      CHECK(ex.tokens.size() == 10);
      CHECK(ex.segment_ids.size() == 10);
      std::vector<double> mask = ngt::attention_mask_of(ex);
      CHECK(std::is_sorted(mask.rbegin(), mask.rend()));
    }
  }
  SUBCASE("max_len below three is rejected") {
    CHECK_THROWS_AS(ngt::encode({"t1"}, {}, v, 2), std::invalid_argument);
  }
}

TEST_CASE("task spec validation enforces head and class consistency") {
  ngt::TaskSpec spec;
  spec.name = "demo";
  CHECK_NOTHROW(ngt::validate_task(spec));

  ngt::TaskSpec bad = spec;
  bad.num_classes = 3;  // three classes cannot use one sigmoid unit
  CHECK_THROWS_AS(ngt::validate_task(bad), std::invalid_argument);
  bad.output_units = 3;
  CHECK_NOTHROW(ngt::validate_task(bad));
  bad.output_units = 2;
  CHECK_THROWS_AS(ngt::validate_task(bad), std::invalid_argument);

  bad = spec;
  bad.metrics.clear();
  CHECK_THROWS_AS(ngt::validate_task(bad), std::invalid_argument);
}

TEST_CASE("boolq loader maps booleans and builds two segments") {
  std::string path = temp_file("ngt_boolq.jsonl");
  write_lines(path, {
      R"({"passage":"it is so","question":"is it","label":true})",
      R"({"question":"is it","passage":"it is not","label":false})",
  });
  Vocab v = ngt::vocab_from_superglue({path}, ngt::SuperGlueSchema::BoolQ);
  auto data = ngt::load_superglue_jsonl(path, ngt::SuperGlueSchema::BoolQ, v, 12);
  REQUIRE(data.size() == 2);
  CHECK(data[0].label == 1);
  CHECK(data[1].label == 0);
  // question is segment 0, passage segment 1
  CHECK(data[0].tokens[1] == v.id("is"));
  CHECK(std::count(data[0].segment_ids.begin(), data[0].segment_ids.end(), 1) == 4);
  CHECK(data[0].tokens.size() == 12);
}

TEST_CASE("cb and rte loaders use the documented label maps") {
  std::string cb = temp_file("ngt_cb.jsonl");
  write_lines(cb, {
      R"({"premise":"p","hypothesis":"h","label":"entailment"})",
      R"({"premise":"p","hypothesis":"h","label":"contradiction"})",
      R"({"premise":"p","hypothesis":"h","label":"neutral"})",
  });
  Vocab vcb = ngt::vocab_from_superglue({cb}, ngt::SuperGlueSchema::Cb);
  auto cbd = ngt::load_superglue_jsonl(cb, ngt::SuperGlueSchema::Cb, vcb, 8);
  REQUIRE(cbd.size() == 3);
  CHECK(cbd[0].label == 0);
  CHECK(cbd[1].label == 1);
  CHECK(cbd[2].label == 2);

  std::string rte = temp_file("ngt_rte.jsonl");
  write_lines(rte, {
      R"({"premise":"p","hypothesis":"h","label":"entailment"})",
      R"({"premise":"p","hypothesis":"h","label":"not_entailment"})",
  });
  Vocab vr = ngt::vocab_from_superglue({rte}, ngt::SuperGlueSchema::Rte);
  auto rted = ngt::load_superglue_jsonl(rte, ngt::SuperGlueSchema::Rte, vr, 8);
  REQUIRE(rted.size() == 2);
  CHECK(rted[0].label == 1);
  CHECK(rted[1].label == 0);

  CHECK(ngt::schema_from_name("cb") == ngt::SuperGlueSchema::Cb);
  CHECK_THROWS_AS(ngt::schema_from_name("wic"), std::invalid_argument);
}

TEST_CASE("loader errors carry the offending line number") {
  std::string path = temp_file("ngt_badlines.jsonl");
  write_lines(path, {
      R"({"premise":"p","hypothesis":"h","label":"entailment"})",
      R"({"premise":"p","hypothesis":)",
  });
  Vocab v;
  try {
    ngt::load_superglue_jsonl(path, ngt::SuperGlueSchema::Rte, v, 8);
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  std::string bad_label = temp_file("ngt_badlabel.jsonl");
  write_lines(bad_label, {R"({"premise":"p","hypothesis":"h","label":"maybe"})"});
  try {
    ngt::load_superglue_jsonl(bad_label, ngt::SuperGlueSchema::Rte, v, 8);
    FAIL("expected a label error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
    CHECK(std::string(e.what()).find("maybe") != std::string::npos);
  }

  std::string missing = temp_file("ngt_missingfield.jsonl");
  write_lines(missing, {R"({"premise":"p","label":"entailment"})"});
  CHECK_THROWS_AS(ngt::load_superglue_jsonl(missing, ngt::SuperGlueSchema::Rte, v, 8),
                  std::invalid_argument);
  CHECK_THROWS_AS(ngt::load_superglue_jsonl("/nonexistent/nowhere.jsonl",
                                            ngt::SuperGlueSchema::Rte, v, 8),
                  std::runtime_error);
}

TEST_CASE("majority generator is balanced, deterministic, and self-consistent") {
  SyntheticDataset ds = ngt::gen_majority(7, 200, 9);
  REQUIRE(ds.examples.size() == 200);
  CHECK(ds.num_classes == 2);

  int64_t ones = 0;
  for (const auto& ex : ds.examples) {
    REQUIRE(ex.tokens.size() == 9);
    int64_t a = 0;
    for (const auto& t : ex.tokens) {
      CHECK((t == "A" || t == "B"));
      a += t == "A" ? 1 : 0;
    }
    // brute-force recount oracle
    CHECK(ex.label == (a * 2 > 9 ? 1 : 0));
    ones += ex.label;
  }
  CHECK(ones == 100);

  SyntheticDataset again = ngt::gen_majority(7, 200, 9);
  for (size_t i = 0; i < ds.examples.size(); ++i) {
    CHECK(again.examples[i].tokens == ds.examples[i].tokens);
    CHECK(again.examples[i].label == ds.examples[i].label);
  }
  SyntheticDataset other = ngt::gen_majority(8, 200, 9);
  bool differs = false;
  for (size_t i = 0; i < ds.examples.size(); ++i)
    differs = differs || other.examples[i].tokens != ds.examples[i].tokens;
  CHECK(differs);

  CHECK_THROWS_AS(ngt::gen_majority(7, 10, 8), std::invalid_argument);
}

TEST_CASE("gated copy labels equal an independent pointer lookup") {
  SyntheticDataset ds = ngt::gen_gated_copy(11, 300, 7, 5);
  REQUIRE(ds.examples.size() == 300);
  CHECK(ds.num_classes == 5);
  for (const auto& ex : ds.examples) {
    REQUIRE(ex.tokens.size() == 7);
    REQUIRE(ex.tokens[0][0] == 'P');
    int64_t p = std::stoll(ex.tokens[0].substr(1));
    CHECK(p >= 1);
    CHECK(p <= 6);
    // symbol tokens are S<class+1>; the pointer selects the p-th of them
    int64_t sym = std::stoll(ex.tokens[static_cast<size_t>(p)].substr(1)) - 1;
    CHECK(ex.label == sym);
  }
  CHECK_THROWS_AS(ngt::gen_gated_copy(11, 10, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS(ngt::gen_gated_copy(11, 10, 7, 1), std::invalid_argument);
}

TEST_CASE("synthetic datasets round-trip through JSONL") {
  SyntheticDataset ds = ngt::gen_gated_copy(3, 25, 5, 3);
  ds.examples[4].group_id = 9;
  ds.examples[4].choice_id = 1;
  std::string path = temp_file("ngt_replay.jsonl");
  ngt::save_synthetic_jsonl(ds, path);
  SyntheticDataset back = ngt::load_synthetic_jsonl(path);
  REQUIRE(back.examples.size() == ds.examples.size());
  for (size_t i = 0; i < ds.examples.size(); ++i) {
    CHECK(back.examples[i].tokens == ds.examples[i].tokens);
    CHECK(back.examples[i].label == ds.examples[i].label);
    CHECK(back.examples[i].group_id == ds.examples[i].group_id);
    CHECK(back.examples[i].choice_id == ds.examples[i].choice_id);
  }
  CHECK(back.num_classes == 3);
}

TEST_CASE("synthetic encoding wraps content in CLS and SEP") {
  SyntheticDataset ds = ngt::gen_majority(5, 6, 5);
  Vocab v = ngt::vocab_for(ds);
  CHECK(v.size() == 6);  // 4 reserved + A + B
  auto data = ngt::encode_synthetic(ds, v, 9);
  REQUIRE(data.size() == 6);
  for (size_t i = 0; i < data.size(); ++i) {
    CHECK(data[i].tokens.size() == 9);
    CHECK(data[i].tokens[0] == ngt::kClsId);
    CHECK(data[i].tokens[6] == ngt::kSepId);
    CHECK(data[i].tokens[7] == ngt::kPadId);
    CHECK(data[i].label == ds.examples[i].label);
    for (size_t k = 1; k <= 5; ++k) CHECK(data[i].tokens[k] >= 4);
  }
}

TEST_CASE("batch iteration shuffles deterministically and emits the tail") {
  SyntheticDataset ds = ngt::gen_majority(21, 10, 5);
  Vocab v = ngt::vocab_for(ds);
  auto data = ngt::encode_synthetic(ds, v, 8);

  auto batches = ngt::batch_iter(data, 8, 42, 0);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0].batch.batch == 8);
  CHECK(batches[1].batch.batch == 2);
  CHECK(batches[0].batch.seq_len == 8);
  CHECK(batches[0].batch.tokens.size() == 64);
  CHECK(batches[0].batch.mask.size() == 64);
  CHECK(batches[0].batch.segments.size() == 64);
  CHECK(batches[0].labels.size() == 8);

  // permutation: every example appears exactly once
  std::vector<int64_t> seen;
  for (const auto& mb : batches)
    seen.insert(seen.end(), mb.example_index.begin(), mb.example_index.end());
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<int64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  // rows carry the right example content
  const auto& mb = batches[0];
  for (int64_t r = 0; r < mb.batch.batch; ++r) {
    const Example& ex = data[static_cast<size_t>(mb.example_index[static_cast<size_t>(r)])];
    for (int64_t c = 0; c < 8; ++c)
      CHECK(mb.batch.tokens[static_cast<size_t>(r * 8 + c)] ==
            ex.tokens[static_cast<size_t>(c)]);
    CHECK(mb.labels[static_cast<size_t>(r)] == ex.label);
  }

  auto same = ngt::batch_iter(data, 8, 42, 0);
  CHECK(same[0].example_index == batches[0].example_index);
  auto next_epoch = ngt::batch_iter(data, 8, 42, 1);
  std::vector<int64_t> flat_a, flat_b;
  for (const auto& b : batches)
    flat_a.insert(flat_a.end(), b.example_index.begin(), b.example_index.end());
  for (const auto& b : next_epoch)
    flat_b.insert(flat_b.end(), b.example_index.begin(), b.example_index.end());
  CHECK(flat_a != flat_b);

  CHECK_THROWS_AS(ngt::batch_iter(data, 0, 42, 0), std::invalid_argument);
  CHECK(ngt::batch_iter({}, 8, 42, 0).empty());
}

TEST_CASE("ordered batches keep dataset order for evaluation") {
  SyntheticDataset ds = ngt::gen_majority(21, 10, 5);
  Vocab v = ngt::vocab_for(ds);
  auto data = ngt::encode_synthetic(ds, v, 8);

  auto batches = ngt::ordered_batches(data, 4);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].batch.batch == 4);
  CHECK(batches[2].batch.batch == 2);
  std::vector<int64_t> seen;
  for (const auto& mb : batches)
    seen.insert(seen.end(), mb.example_index.begin(), mb.example_index.end());
  CHECK(seen == std::vector<int64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  for (int64_t c = 0; c < 8; ++c)
    CHECK(batches[1].batch.tokens[static_cast<size_t>(c)] ==
          data[4].tokens[static_cast<size_t>(c)]);

  CHECK_THROWS_AS(ngt::ordered_batches(data, 0), std::invalid_argument);
  CHECK(ngt::ordered_batches({}, 4).empty());
}

TEST_CASE("multiple-choice groups stay contiguous in choice order") {
  // 4 questions with 3 options each, encoded length 6
  SyntheticDataset ds;
  ds.task = "choices";
  ds.num_classes = 2;
  for (int64_t q = 0; q < 4; ++q) {
    for (int64_t c = 0; c < 3; ++c) {
      ngt::SyntheticExample ex;
      ex.tokens = {"Q" + std::to_string(q), "O" + std::to_string(c)};
      ex.label = c == 1 ? 1 : 0;
      ex.group_id = q;
      ex.choice_id = c;
      ds.examples.push_back(ex);
    }
  }
  Vocab v = ngt::vocab_for(ds);
  auto data = ngt::encode_synthetic(ds, v, 6);

  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    auto batches = ngt::batch_iter(data, 5, seed, 0);
    std::vector<int64_t> flat;
    for (const auto& b : batches)
      flat.insert(flat.end(), b.example_index.begin(), b.example_index.end());
    REQUIRE(flat.size() == 12);
    for (size_t i = 0; i < flat.size(); i += 3) {
      // each aligned triple is one question, options in order
      int64_t q = flat[i] / 3;
      CHECK(flat[i] == q * 3);
      CHECK(flat[i + 1] == q * 3 + 1);
      CHECK(flat[i + 2] == q * 3 + 2);
    }
  }
}
