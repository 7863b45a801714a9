#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semigrad/nn.hpp"
#include "semigrad/tasks.hpp"

namespace semigrad {

// ---------------------------------------------------------------------------
// Branch attribution: max-product statistics at the attention branching
// point, per layer and position, for one example.
// ---------------------------------------------------------------------------

struct PositionBranchRow {
  int layer = 0;
  int position = 0;
  /// Aggregated max-product value per branch (skip/keys/values/queries).
  std::array<double, kBranchCount> value{};
  std::array<bool, kBranchCount> reachable{};
  /// Branch holding the top gradient path from this position's hidden state;
  /// -1 when no branch reaches the output.
  int argmax_branch = -1;
  /// |value| shares over the four branches; all zero when the total is zero.
  std::array<double, kBranchCount> normalized_abs{};
};

struct BranchReport {
  int predicted = -1;
  int label = -1;
  int rival = -1;
  bool correct = false;
  std::vector<PositionBranchRow> rows;
};

/// Runs one max-product backward pass from the decision margin
/// (log softmax of the label class minus the strongest other class) and
/// reads the four aggregated branch values at every (layer, position)
/// anchor. Misclassified examples come back flagged so callers can exclude
/// them from aggregates.
BranchReport branch_attribution(const ModelConfig& cfg, const ParamStore& params,
                                std::span<const int> tokens, int label);

enum class TokenType { First = 0, Repeat = 1, Other = 2 };
inline constexpr int kTokenTypeCount = 3;
std::string_view token_type_name(TokenType t);

/// Position roles for the first-token-repetition task: position 0 is First,
/// the repeat position (if any) is Repeat, the rest are Other.
TokenType classify_position(std::span<const int> tokens, int position);

/// Final-layer aggregation over many examples, grouped by token type.
struct BranchSummary {
  std::size_t examples_used = 0;
  std::size_t examples_skipped = 0;
  // [token type][branch]
  std::array<std::array<double, kBranchCount>, kTokenTypeCount> argmax_share{};
  std::array<std::array<double, kBranchCount>, kTokenTypeCount> mean_abs_value{};
  std::array<std::size_t, kTokenTypeCount> positions_seen{};
};

BranchSummary summarize_final_layer(const ModelConfig& cfg, const ParamStore& params,
                                    std::span<const Example> examples);

// ---------------------------------------------------------------------------
// Entropy of the aggregated input representations.
// ---------------------------------------------------------------------------

struct InputEntropyRow {
  int index = 0;  // position (transformer) or feature (MLP)
  double nats = 0.0;
  bool defined = false;
};

struct EntropyReport {
  int predicted = -1;
  int label = -1;
  bool correct = false;
  std::vector<InputEntropyRow> rows;
  double mean_nats = 0.0;
  std::size_t undefined_rows = 0;
};

/// Entropy-semiring backward pass (log-domain) from the decision margin;
/// one row per token position, aggregated over that token's embedding
/// nodes, plus the across-token mean.
EntropyReport entropy_of_inputs(const ModelConfig& cfg, const ParamStore& params,
                                std::span<const int> tokens, int label);

/// Same measurement for an MLP, one row per input feature.
EntropyReport entropy_of_features(const MlpConfig& cfg, const ParamStore& params,
                                  std::span<const double> features, int label);

struct LengthSweepRow {
  int length = 0;
  double mean_entropy = 0.0;
  std::size_t examples = 0;
};

/// Mean input entropy of a fixed model on random token sequences of each
/// requested length.
std::vector<LengthSweepRow> entropy_length_sweep(const ModelConfig& cfg, const ParamStore& params,
                                                 std::span<const int> lengths, int examples,
                                                 std::uint64_t seed);

struct HiddenSweepRow {
  int hidden = 0;
  double val_accuracy = 0.0;
  double mean_entropy = 0.0;
  double relevant_entropy = 0.0;
  double irrelevant_mean_entropy = 0.0;
};

/// Trains an MLP of the given hidden size on the first-feature threshold
/// task and measures per-feature input entropy on held-out examples.
HiddenSweepRow mlp_entropy_for_hidden(int hidden, int hidden_layers, int train_count,
                                      int eval_count, const TrainConfig& tc, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Minimum description length by prequential (online) coding.
// ---------------------------------------------------------------------------

struct MdlSchedule {
  /// Ascending training-prefix fractions; the last must be 1.0.
  std::vector<double> fractions;

  /// Doubling prefixes 0.1% .. 51.2% capped by halves of the full set:
  /// {0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.0625, 0.125, 0.25, 0.5, 1.0}.
  static MdlSchedule standard();
  void validate() const;
};

struct MdlSegment {
  std::size_t train_prefix = 0;  // examples the coding model was trained on
  std::size_t begin = 0;
  std::size_t end = 0;
  double codelength_nats = 0.0;
};

struct MdlResult {
  DatasetSpec task;
  ModelConfig model;
  std::vector<MdlSegment> segments;
  double total_nats = 0.0;
  double final_val_accuracy = 0.0;
  /// Final validation accuracy cleared the 0.90 bar (kept in scatters).
  bool kept = false;
  bool diverged = false;
  /// Mean input entropy of the final model over validation examples.
  double mean_input_entropy = 0.0;
  bool entropy_defined = false;
};

/// First segment is coded uniformly at log(classes) per example; each later
/// segment is coded by a fresh model trained on the preceding prefix.
/// `random_labels` replaces the labels with coin flips first (the
/// unlearnable control).
MdlResult compute_mdl(const DatasetSpec& task, ModelConfig model, TrainConfig train,
                      const MdlSchedule& schedule, bool random_labels = false,
                      int entropy_examples = 50);

// ---------------------------------------------------------------------------
// Deterministic report artifacts.
// ---------------------------------------------------------------------------

std::string config_hash_hex(const std::string& canonical);

void write_branch_summary_csv(const std::filesystem::path& path, const BranchSummary& summary);
void write_scatter_csv(const std::filesystem::path& path, std::span<const MdlResult> runs,
                       std::span<const std::uint64_t> seeds);
void write_length_sweep_csv(const std::filesystem::path& path,
                            std::span<const LengthSweepRow> rows);
void write_hidden_sweep_csv(const std::filesystem::path& path,
                            std::span<const HiddenSweepRow> rows);

}  // namespace semigrad
