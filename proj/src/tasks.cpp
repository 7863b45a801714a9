#include "semigrad/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace semigrad {

using nlohmann::json;

std::string_view task_name(TaskKind k) {
  switch (k) {
    case TaskKind::ContainsTokenSet: return "ContainsTokenSet";
    case TaskKind::Contains1: return "Contains1";
    case TaskKind::FirstTokenRepeatedImmediately: return "FirstTokenRepeatedImmediately";
    case TaskKind::FirstTokenRepeatedLast: return "FirstTokenRepeatedLast";
    case TaskKind::AdjacentDuplicate: return "AdjacentDuplicate";
    case TaskKind::FirstTokenRepeatedOnce: return "FirstTokenRepeatedOnce";
    case TaskKind::BinCountOnes: return "BinCountOnes";
  }
  return "unknown";
}

TaskKind task_from_name(std::string_view name) {
  static const std::pair<std::string_view, TaskKind> table[] = {
      {"ContainsTokenSet", TaskKind::ContainsTokenSet},
      {"Contains1", TaskKind::Contains1},
      {"FirstTokenRepeatedImmediately", TaskKind::FirstTokenRepeatedImmediately},
      {"FirstTokenRepeatedLast", TaskKind::FirstTokenRepeatedLast},
      {"AdjacentDuplicate", TaskKind::AdjacentDuplicate},
      {"FirstTokenRepeatedOnce", TaskKind::FirstTokenRepeatedOnce},
      {"BinCountOnes", TaskKind::BinCountOnes}};
  for (const auto& [n, k] : table) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown task: " + std::string(name));
}

int DatasetSpec::num_classes() const {
  return kind == TaskKind::BinCountOnes ? classes : 2;
}

void DatasetSpec::validate() const {
  if (seq_len < 2) throw std::invalid_argument("seq_len must be at least 2");
  if (vocab < 2) throw std::invalid_argument("vocab must be at least 2");
  if (count < 1) throw std::invalid_argument("count must be positive");
  if (kind == TaskKind::BinCountOnes) {
    if (classes < 2 || classes > seq_len) {
      throw std::invalid_argument("BinCountOnes: classes must lie in [2, seq_len]");
    }
    if (seq_len % classes != 0) {
      throw std::invalid_argument("BinCountOnes: classes must divide seq_len");
    }
  } else if (classes != 2) {
    throw std::invalid_argument(std::string(task_name(kind)) + " is binary");
  }
  if (kind == TaskKind::ContainsTokenSet) {
    if (token_set.empty()) throw std::invalid_argument("ContainsTokenSet: token set required");
    std::set<int> uniq(token_set.begin(), token_set.end());
    if (uniq.size() != token_set.size()) {
      throw std::invalid_argument("ContainsTokenSet: duplicate tokens in set");
    }
    if (static_cast<int>(token_set.size()) > seq_len) {
      throw std::invalid_argument("ContainsTokenSet: token set larger than the sequence");
    }
    for (int t : token_set) {
      if (t < 1 || t > vocab) throw std::invalid_argument("ContainsTokenSet: token outside vocab");
    }
  } else if (!token_set.empty()) {
    throw std::invalid_argument("token_set only applies to ContainsTokenSet");
  }
}

int label_of(const DatasetSpec& spec, std::span<const int> tokens) {
  const int s = static_cast<int>(tokens.size());
  switch (spec.kind) {
    case TaskKind::ContainsTokenSet: {
      for (int want : spec.token_set) {
        if (std::find(tokens.begin(), tokens.end(), want) == tokens.end()) return 0;
      }
      return 1;
    }
    case TaskKind::Contains1:
      return std::find(tokens.begin(), tokens.end(), 1) != tokens.end() ? 1 : 0;
    case TaskKind::FirstTokenRepeatedImmediately:
      return tokens[1] == tokens[0] ? 1 : 0;
    case TaskKind::FirstTokenRepeatedLast:
      return tokens[static_cast<std::size_t>(s) - 1] == tokens[0] ? 1 : 0;
    case TaskKind::AdjacentDuplicate: {
      for (int i = 0; i + 1 < s; ++i) {
        if (tokens[static_cast<std::size_t>(i)] == tokens[static_cast<std::size_t>(i) + 1]) {
          return 1;
        }
      }
      return 0;
    }
    case TaskKind::FirstTokenRepeatedOnce: {
      for (int i = 1; i < s; ++i) {
        if (tokens[static_cast<std::size_t>(i)] == tokens[0]) return 1;
      }
      return 0;
    }
    case TaskKind::BinCountOnes: {
      const long count1 = std::count(tokens.begin(), tokens.end(), 1);
      // ceil(count / (S/C)) - 1, with zero ones mapped to class 0 (the
      // formula's -1 only applies once at least one 1 is present).
      if (count1 == 0) return 0;
      const long bin = spec.seq_len / spec.classes;
      return static_cast<int>((count1 + bin - 1) / bin - 1);
    }
  }
  throw std::logic_error("unhandled task kind");
}

namespace {

std::vector<int> class_quotas(int count, int classes) {
  std::vector<int> quota(static_cast<std::size_t>(classes), count / classes);
  for (int i = 0; i < count % classes; ++i) quota[static_cast<std::size_t>(i)] += 1;
  return quota;
}

int rand_token(std::mt19937_64& rng, int vocab) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(vocab)) + 1;
}

int rand_token_except(std::mt19937_64& rng, int vocab, int avoid) {
  // vocab >= 2 guarantees progress
  int t = rand_token(rng, vocab);
  while (t == avoid) t = rand_token(rng, vocab);
  return t;
}

/// Constructive sampler for FirstTokenRepeatedOnce: positives carry exactly
/// one repeat of the first token, negatives none.
Example sample_first_token_repeated_once(std::mt19937_64& rng, const DatasetSpec& spec,
                                         bool positive) {
  Example ex;
  ex.tokens.resize(static_cast<std::size_t>(spec.seq_len));
  ex.tokens[0] = rand_token(rng, spec.vocab);
  for (int i = 1; i < spec.seq_len; ++i) {
    ex.tokens[static_cast<std::size_t>(i)] = rand_token_except(rng, spec.vocab, ex.tokens[0]);
  }
  if (positive) {
    const int pos = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(spec.seq_len - 1));
    ex.tokens[static_cast<std::size_t>(pos)] = ex.tokens[0];
  }
  ex.label = positive ? 1 : 0;
  return ex;
}

/// Constructive sampler for BinCountOnes: draws the number of 1s uniformly
/// from the class's count range, then places them at random positions.
Example sample_bin_count_ones(std::mt19937_64& rng, const DatasetSpec& spec, int klass) {
  const int bin = spec.seq_len / spec.classes;
  const int lo = klass == 0 ? 0 : klass * bin + 1;
  const int hi = (klass + 1) * bin;
  const int ones = lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  Example ex;
  ex.tokens.resize(static_cast<std::size_t>(spec.seq_len));
  std::vector<int> order(static_cast<std::size_t>(spec.seq_len));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 0; i < spec.seq_len; ++i) {
    ex.tokens[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
        i < ones ? 1 : rand_token_except(rng, spec.vocab, 1);
  }
  ex.label = klass;
  return ex;
}

}  // namespace

Dataset generate(const DatasetSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int classes = spec.num_classes();
  std::vector<int> quota = class_quotas(spec.count, classes);

  Dataset data;
  data.spec = spec;
  data.examples.reserve(static_cast<std::size_t>(spec.count));

  const bool constructive = spec.kind == TaskKind::FirstTokenRepeatedOnce ||
                            spec.kind == TaskKind::BinCountOnes;
  if (constructive) {
    for (int klass = 0; klass < classes; ++klass) {
      for (int i = 0; i < quota[static_cast<std::size_t>(klass)]; ++i) {
        Example ex = spec.kind == TaskKind::FirstTokenRepeatedOnce
                         ? sample_first_token_repeated_once(rng, spec, klass == 1)
                         : sample_bin_count_ones(rng, spec, klass);
        if (label_of(spec, ex.tokens) != ex.label) {
          throw std::logic_error("constructed example disagrees with the labeling function");
        }
        data.examples.push_back(std::move(ex));
      }
    }
  } else {
    // Rejection sampling against the per-class quotas.
    std::vector<int> open = quota;
    long remaining = spec.count;
    const long attempt_cap = 20000L * spec.count + 1000000L;
    long attempts = 0;
    Example ex;
    ex.tokens.resize(static_cast<std::size_t>(spec.seq_len));
    while (remaining > 0) {
      if (++attempts > attempt_cap) {
        throw std::runtime_error("generate: class balance infeasible for " +
                                 std::string(task_name(spec.kind)));
      }
      for (auto& t : ex.tokens) t = rand_token(rng, spec.vocab);
      ex.label = label_of(spec, ex.tokens);
      auto& room = open[static_cast<std::size_t>(ex.label)];
      if (room > 0) {
        --room;
        --remaining;
        data.examples.push_back(ex);
      }
    }
  }

  // Interleave classes deterministically so prefixes of the dataset stay
  // roughly balanced.
  std::mt19937_64 order_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(data.examples.begin(), data.examples.end(), order_rng);
  return data;
}

void randomize_labels(Dataset& data, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int classes = data.spec.num_classes();
  for (auto& ex : data.examples) {
    ex.label = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
  }
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& data, double train_fraction,
                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(data.examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                   train_fraction * static_cast<double>(order.size()))));
  Dataset train, val;
  train.spec = data.spec;
  val.spec = data.spec;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : val).examples.push_back(data.examples[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

namespace {
constexpr int kDatasetVersion = 1;

json spec_to_json(const DatasetSpec& spec) {
  json j{{"format", "semigrad-dataset"},
         {"version", kDatasetVersion},
         {"task", std::string(task_name(spec.kind))},
         {"seq_len", spec.seq_len},
         {"vocab", spec.vocab},
         {"count", spec.count},
         {"seed", spec.seed},
         {"classes", spec.classes}};
  if (spec.kind == TaskKind::ContainsTokenSet) j["token_set"] = spec.token_set;
  return j;
}

DatasetSpec spec_from_json(const json& j) {
  if (j.value("format", "") != "semigrad-dataset" || j.value("version", 0) != kDatasetVersion) {
    throw std::runtime_error("dataset header: unknown format or version");
  }
  DatasetSpec spec;
  spec.kind = task_from_name(j.at("task").get<std::string>());
  spec.seq_len = j.at("seq_len").get<int>();
  spec.vocab = j.at("vocab").get<int>();
  spec.count = j.at("count").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.classes = j.at("classes").get<int>();
  if (j.contains("token_set")) spec.token_set = j.at("token_set").get<std::vector<int>>();
  return spec;
}
}  // namespace

void save_jsonl(const Dataset& data, std::ostream& out) {
  out << spec_to_json(data.spec).dump() << "\n";
  for (const auto& ex : data.examples) {
    out << json{{"tokens", ex.tokens}, {"label", ex.label}}.dump() << "\n";
  }
}

Dataset load_jsonl(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> std::runtime_error {
    return std::runtime_error("dataset line " + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(in, line)) throw std::runtime_error("dataset: empty stream, header required");
  ++lineno;
  Dataset data;
  try {
    data.spec = spec_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Example ex;
      ex.tokens = j.at("tokens").get<std::vector<int>>();
      ex.label = j.at("label").get<int>();
      if (static_cast<int>(ex.tokens.size()) != data.spec.seq_len) {
        throw fail("token count disagrees with header seq_len");
      }
      data.examples.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
  }
  return data;
}

Dataset load_jsonl_checked(std::istream& in, const DatasetSpec& expected) {
  Dataset data = load_jsonl(in);
  const auto& got = data.spec;
  if (got.kind != expected.kind || got.seq_len != expected.seq_len ||
      got.vocab != expected.vocab || got.count != expected.count || got.seed != expected.seed ||
      got.classes != expected.classes || got.token_set != expected.token_set) {
    throw std::runtime_error("dataset header does not match the requested spec");
  }
  return data;
}

}  // namespace semigrad
