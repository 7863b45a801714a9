#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace semigrad {

enum class TaskKind {
  ContainsTokenSet,
  Contains1,
  FirstTokenRepeatedImmediately,
  FirstTokenRepeatedLast,
  AdjacentDuplicate,
  FirstTokenRepeatedOnce,
  BinCountOnes,
};

std::string_view task_name(TaskKind k);
TaskKind task_from_name(std::string_view name);

struct DatasetSpec {
  TaskKind kind = TaskKind::Contains1;
  int seq_len = 10;
  int vocab = 20;
  int count = 10000;
  std::uint64_t seed = 1;
  /// Only BinCountOnes is multiclass; everything else is binary.
  int classes = 2;
  /// Required tokens for ContainsTokenSet.
  std::vector<int> token_set;

  int num_classes() const;
  void validate() const;  // throws std::invalid_argument
};

struct Example {
  std::vector<int> tokens;  // values in [1, vocab]
  int label = 0;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<Example> examples;
};

/// Pure labeling function for any token sequence valid under the spec.
int label_of(const DatasetSpec& spec, std::span<const int> tokens);

/// Deterministic, label-balanced generation (per-class quotas are exact up
/// to the remainder of count / classes).
Dataset generate(const DatasetSpec& spec);

/// Replaces every label with a seeded fair coin flip over the classes,
/// decoupling labels from tokens. Control for description-length baselines.
void randomize_labels(Dataset& data, std::uint64_t seed);

/// Deterministic shuffled split; fraction refers to the training share.
std::pair<Dataset, Dataset> split_train_val(const Dataset& data, double train_fraction,
                                            std::uint64_t seed);

// Line-delimited JSON with a header record carrying the generating spec.
void save_jsonl(const Dataset& data, std::ostream& out);
Dataset load_jsonl(std::istream& in);
/// Loads and rejects when the file header disagrees with `expected`.
Dataset load_jsonl_checked(std::istream& in, const DatasetSpec& expected);

}  // namespace semigrad
