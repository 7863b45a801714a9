#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "semigrad/tasks.hpp"

using namespace semigrad;

namespace {

DatasetSpec spec_for(TaskKind kind, int seq_len = 6, int vocab = 9, int count = 600,
                     std::uint64_t seed = 3) {
  DatasetSpec s;
  s.kind = kind;
  s.seq_len = seq_len;
  s.vocab = vocab;
  s.count = count;
  s.seed = seed;
  if (kind == TaskKind::ContainsTokenSet) s.token_set = {1, 2, 3};
  return s;
}

/// Naive second labeler, written straight off the task descriptions and kept
/// deliberately independent of label_of.
int naive_label(const DatasetSpec& spec, const std::vector<int>& x) {
  const int s = static_cast<int>(x.size());
  switch (spec.kind) {
    case TaskKind::ContainsTokenSet: {
      bool all = true;
      for (int want : spec.token_set) {
        bool found = false;
        for (int t : x) found = found || t == want;
        all = all && found;
      }
      return all ? 1 : 0;
    }
    case TaskKind::Contains1: {
      for (int t : x) {
        if (t == 1) return 1;
      }
      return 0;
    }
    case TaskKind::FirstTokenRepeatedImmediately:
      return x[0] == x[1] ? 1 : 0;
    case TaskKind::FirstTokenRepeatedLast:
      return x[0] == x[static_cast<std::size_t>(s - 1)] ? 1 : 0;
    case TaskKind::AdjacentDuplicate: {
      for (int i = 1; i < s; ++i) {
        if (x[static_cast<std::size_t>(i)] == x[static_cast<std::size_t>(i - 1)]) return 1;
      }
      return 0;
    }
    case TaskKind::FirstTokenRepeatedOnce: {
      int repeats = 0;
      for (int i = 1; i < s; ++i) repeats += x[static_cast<std::size_t>(i)] == x[0] ? 1 : 0;
      return repeats >= 1 ? 1 : 0;
    }
    case TaskKind::BinCountOnes: {
      int ones = 0;
      for (int t : x) ones += t == 1 ? 1 : 0;
      if (ones == 0) return 0;
      const double bin = static_cast<double>(spec.seq_len) / spec.classes;
      return static_cast<int>(std::ceil(ones / bin)) - 1;
    }
  }
  return -1;
}

}  // namespace

TEST_CASE("published labeling examples") {
  DatasetSpec ftro = spec_for(TaskKind::FirstTokenRepeatedOnce, 4, 9);
  CHECK(label_of(ftro, std::vector<int>{1, 4, 6, 1}) == 1);
  CHECK(label_of(ftro, std::vector<int>{3, 4, 6, 2}) == 0);

  DatasetSpec c1 = spec_for(TaskKind::Contains1);
  CHECK(label_of(c1, std::vector<int>{1, 3, 4, 2, 5, 2}) == 1);
  CHECK(label_of(c1, std::vector<int>{6, 5, 9, 2, 2, 4}) == 0);

  DatasetSpec cts = spec_for(TaskKind::ContainsTokenSet);
  CHECK(label_of(cts, std::vector<int>{1, 3, 4, 2, 5, 2}) == 1);
  CHECK(label_of(cts, std::vector<int>{1, 5, 9, 2, 2, 4}) == 0);

  DatasetSpec ftri = spec_for(TaskKind::FirstTokenRepeatedImmediately);
  CHECK(label_of(ftri, std::vector<int>{3, 3, 2, 6, 7, 8}) == 1);
  CHECK(label_of(ftri, std::vector<int>{5, 3, 2, 6, 7, 8}) == 0);

  DatasetSpec ftrl = spec_for(TaskKind::FirstTokenRepeatedLast);
  CHECK(label_of(ftrl, std::vector<int>{8, 3, 2, 6, 7, 8}) == 1);
  CHECK(label_of(ftrl, std::vector<int>{8, 3, 2, 6, 7, 4}) == 0);

  DatasetSpec ad = spec_for(TaskKind::AdjacentDuplicate);
  CHECK(label_of(ad, std::vector<int>{1, 3, 6, 6, 7, 8}) == 1);
  CHECK(label_of(ad, std::vector<int>{1, 3, 6, 8, 7, 8}) == 0);
}

TEST_CASE("bin-count-ones follows the ceiling rule") {
  DatasetSpec spec = spec_for(TaskKind::BinCountOnes);
  spec.classes = 3;
  CHECK(label_of(spec, std::vector<int>{1, 3, 4, 2, 5, 2}) == 0);
  CHECK(label_of(spec, std::vector<int>{1, 3, 4, 2, 3, 1}) == 0);
  CHECK(label_of(spec, std::vector<int>{1, 3, 4, 2, 1, 1}) == 1);
  CHECK(label_of(spec, std::vector<int>{1, 3, 1, 1, 5, 1}) == 1);
  CHECK(label_of(spec, std::vector<int>{1, 3, 1, 1, 1, 1}) == 2);
  CHECK(label_of(spec, std::vector<int>{1, 1, 1, 1, 1, 1}) == 2);
  // No ones at all still lands in the lowest class.
  CHECK(label_of(spec, std::vector<int>{2, 3, 4, 2, 5, 2}) == 0);
}

TEST_CASE("bin-count-ones labels are monotone in the count of ones") {
  DatasetSpec spec = spec_for(TaskKind::BinCountOnes, 12, 9);
  spec.classes = 4;
  int prev = 0;
  for (int ones = 0; ones <= 12; ++ones) {
    std::vector<int> x(12, 2);
    std::fill(x.begin(), x.begin() + ones, 1);
    const int label = label_of(spec, x);
    CHECK(label >= prev);
    CHECK(label >= 0);
    CHECK(label < spec.classes);
    prev = label;
  }
}

TEST_CASE("independent double labeling agrees on random inputs") {
  std::mt19937_64 rng(77);
  std::vector<DatasetSpec> specs;
  for (TaskKind k : {TaskKind::ContainsTokenSet, TaskKind::Contains1,
                     TaskKind::FirstTokenRepeatedImmediately, TaskKind::FirstTokenRepeatedLast,
                     TaskKind::AdjacentDuplicate, TaskKind::FirstTokenRepeatedOnce}) {
    specs.push_back(spec_for(k));
  }
  DatasetSpec bco = spec_for(TaskKind::BinCountOnes);
  bco.classes = 3;
  specs.push_back(bco);

  for (const auto& spec : specs) {
    for (int i = 0; i < 100000; ++i) {
      std::vector<int> x(static_cast<std::size_t>(spec.seq_len));
      for (auto& t : x) t = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(spec.vocab));
      if (label_of(spec, x) != naive_label(spec, x)) {
        CAPTURE(task_name(spec.kind));
        REQUIRE(label_of(spec, x) == naive_label(spec, x));
      }
    }
  }
  CHECK(true);
}

TEST_CASE("generation balances classes and honors labels") {
  for (TaskKind k : {TaskKind::Contains1, TaskKind::FirstTokenRepeatedOnce,
                     TaskKind::AdjacentDuplicate, TaskKind::ContainsTokenSet}) {
    const DatasetSpec spec = spec_for(k, 8, 12, 500);
    const Dataset data = generate(spec);
    REQUIRE(data.examples.size() == 500);
    std::map<int, int> counts;
    for (const auto& ex : data.examples) {
      CHECK(label_of(spec, ex.tokens) == ex.label);
      for (int t : ex.tokens) {
        CHECK(t >= 1);
        CHECK(t <= spec.vocab);
      }
      counts[ex.label] += 1;
    }
    for (const auto& [label, n] : counts) {
      CHECK(std::abs(n - 250) <= 10);  // ±2%
    }
  }
}

TEST_CASE("bin-count-ones generation covers every class") {
  DatasetSpec spec = spec_for(TaskKind::BinCountOnes, 36, 36, 360, 5);
  spec.classes = 36;
  const Dataset data = generate(spec);
  std::map<int, int> counts;
  for (const auto& ex : data.examples) {
    CHECK(label_of(spec, ex.tokens) == ex.label);
    counts[ex.label] += 1;
  }
  CHECK(counts.size() == 36);
  for (const auto& [label, n] : counts) CHECK(n == 10);
}

TEST_CASE("first-token-repeat positives carry exactly one repeat") {
  const DatasetSpec spec = spec_for(TaskKind::FirstTokenRepeatedOnce, 10, 20, 400);
  const Dataset data = generate(spec);
  for (const auto& ex : data.examples) {
    int repeats = 0;
    for (std::size_t i = 1; i < ex.tokens.size(); ++i) {
      repeats += ex.tokens[i] == ex.tokens[0] ? 1 : 0;
    }
    CHECK(repeats == (ex.label == 1 ? 1 : 0));
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const DatasetSpec spec = spec_for(TaskKind::Contains1, 8, 10, 200, 42);
  const Dataset a = generate(spec);
  const Dataset b = generate(spec);
  REQUIRE(a.examples.size() == b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    CHECK(a.examples[i].tokens == b.examples[i].tokens);
    CHECK(a.examples[i].label == b.examples[i].label);
  }
}

TEST_CASE("invalid specs are rejected") {
  DatasetSpec too_big = spec_for(TaskKind::ContainsTokenSet, 2, 9);
  too_big.token_set = {1, 2, 3};
  CHECK_THROWS_AS(too_big.validate(), std::invalid_argument);

  DatasetSpec bad_div = spec_for(TaskKind::BinCountOnes, 10, 9);
  bad_div.classes = 3;  // 3 does not divide 10
  CHECK_THROWS_AS(bad_div.validate(), std::invalid_argument);

  DatasetSpec out_of_vocab = spec_for(TaskKind::ContainsTokenSet, 6, 2);
  out_of_vocab.token_set = {5};
  CHECK_THROWS_AS(out_of_vocab.validate(), std::invalid_argument);
}

TEST_CASE("jsonl serialization round-trips") {
  const DatasetSpec spec = spec_for(TaskKind::FirstTokenRepeatedOnce, 6, 9, 100, 9);
  const Dataset data = generate(spec);
  std::stringstream ss;
  save_jsonl(data, ss);
  const Dataset back = load_jsonl(ss);
  REQUIRE(back.examples.size() == data.examples.size());
  CHECK(back.spec.kind == spec.kind);
  CHECK(back.spec.seed == spec.seed);
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    CHECK(back.examples[i].tokens == data.examples[i].tokens);
    CHECK(back.examples[i].label == data.examples[i].label);
  }
}

TEST_CASE("jsonl header checks and parse errors") {
  const DatasetSpec spec = spec_for(TaskKind::Contains1, 6, 9, 10, 1);
  const Dataset data = generate(spec);
  std::stringstream ss;
  save_jsonl(data, ss);

  DatasetSpec other = spec;
  other.seed = 2;
  std::stringstream again(ss.str());
  CHECK_THROWS_WITH_AS(load_jsonl_checked(again, other), doctest::Contains("header"),
                       std::runtime_error);

  // Header-only file: an empty dataset is fine.
  std::stringstream header_only;
  Dataset empty;
  empty.spec = spec;
  save_jsonl(empty, header_only);
  const Dataset loaded = load_jsonl(header_only);
  CHECK(loaded.examples.empty());

  // Malformed record: the error carries the line number.
  std::stringstream broken;
  save_jsonl(empty, broken);
  std::string content = broken.str() + "{\"tokens\": [1,2,3,4,5,6]}\n";
  std::stringstream input(content);
  CHECK_THROWS_WITH_AS(load_jsonl(input), doctest::Contains("line 2"), std::runtime_error);
}

TEST_CASE("label randomization and splitting") {
  const DatasetSpec spec = spec_for(TaskKind::Contains1, 6, 9, 300, 8);
  Dataset data = generate(spec);
  randomize_labels(data, 123);
  int ones = 0;
  for (const auto& ex : data.examples) ones += ex.label;
  CHECK(ones > 100);
  CHECK(ones < 200);

  const auto [train, val] = split_train_val(data, 0.9, 5);
  CHECK(train.examples.size() == 270);
  CHECK(val.examples.size() == 30);
}
