#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semigrad/ops.hpp"
#include "semigrad/tape.hpp"
#include "semigrad/tasks.hpp"

namespace semigrad {

enum class Readout {
  /// Classifier reads the mean of all position outputs.
  MeanPool,
  /// Classifier reads the first position's output; other positions reach
  /// the logits only through attention.
  FirstToken,
};

std::string_view readout_name(Readout r);
Readout readout_from_name(std::string_view name);

struct ModelConfig {
  int layers = 1;
  int hidden = 16;
  int heads = 2;
  int vocab = 20;
  int seq_len = 10;
  int classes = 2;
  /// Feed-forward expansion ratio; 4x is conventional, unconfirmed by any
  /// reference for these models.
  int ffn_mult = 4;
  Readout readout = Readout::MeanPool;
  /// Embedding init stddev and the query/key widening over the Xavier
  /// baseline. At 1x Xavier the attention pathways of these desk-scale
  /// models carry negligible gradient for tens of epochs.
  double embed_init_std = 0.1;
  double attn_qk_init_gain = 3.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct MlpConfig {
  int in_features = 4;
  int hidden = 16;
  int hidden_layers = 2;
  int classes = 2;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Stop once validation accuracy reaches this value; 1.1 disables.
  double accuracy_gate = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Flat parameter vector with named, shaped views.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  static ParamStore init_transformer(const ModelConfig& cfg);
  static ParamStore init_mlp(const MlpConfig& cfg);

  std::size_t size() const { return data_.size(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& entry(const std::string& name) const;
  std::span<double> tensor(const std::string& name);
  std::span<const double> tensor(const std::string& name) const;

  void add(std::string name, std::vector<int> shape);
  void fill_normal(std::mt19937_64& rng, const std::string& name, double stddev);
  void fill(const std::string& name, double value);

 private:
  std::vector<Entry> entries_;
  std::vector<double> data_;
};

enum class Branch : int { Skip = 0, Keys = 1, Values = 2, Queries = 3 };
inline constexpr int kBranchCount = 4;
std::string_view branch_name(Branch b);

/// Node sets recorded while building: for every layer and position, the four
/// sets of identity nodes through which that position's hidden state fans
/// out into the skip connection and the attention projections. Together they
/// partition the hidden state's out-edges.
struct BranchAnchors {
  // [layer][position][branch] -> the hidden-size anchor node ids
  std::vector<std::vector<std::array<std::vector<NodeId>, kBranchCount>>> ids;

  bool empty() const { return ids.empty(); }
};

struct ModelGraph {
  TensorRef logits;
  BranchAnchors anchors;
  /// Per position: the embedding-row identity nodes (one set per token).
  std::vector<std::vector<NodeId>> token_inputs;
  /// Flat parameter index -> tape input node.
  std::vector<NodeId> param_nodes;
};

/// Lowers the full encoder onto the tape for one token sequence. Sequences
/// shorter than cfg.seq_len use the leading position embeddings and pool
/// over the active positions only.
ModelGraph build_transformer(Tape& tape, const ModelConfig& cfg, const ParamStore& params,
                             std::span<const int> tokens);

struct MlpGraph {
  TensorRef logits;
  std::vector<NodeId> feature_inputs;
  std::vector<NodeId> param_nodes;
};

MlpGraph build_mlp(Tape& tape, const MlpConfig& cfg, const ParamStore& params,
                   std::span<const double> features);

/// Cross-entropy in nats: logsumexp(logits) - logits[label], with the
/// stabilizing max captured as a PeekMax constant.
NodeId append_cross_entropy(Tape& tape, const TensorRef& logits, int label);

/// Analysis scalar: log softmax(true) - log softmax(rival). The shared
/// normalizer cancels, so this lowers to the exact logit difference.
NodeId append_decision_margin(Tape& tape, const TensorRef& logits, int true_class, int rival);

struct EpochStats {
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  bool diverged = false;
  bool reached_gate = false;
  double final_val_accuracy = 0.0;
};

/// Persistent training/evaluation graph for one (config, sequence length):
/// built once, then re-wired per example. The graph shape is independent of
/// the tokens, so only the embedding-lookup edges and the loss class move.
class TransformerRunner {
 public:
  TransformerRunner(const ModelConfig& cfg, int length);

  /// Copies current parameter values into the tape's input nodes.
  void set_params(const ParamStore& params);
  /// Re-points the embedding lookups and the cross-entropy label.
  void set_example(std::span<const int> tokens, int label);
  /// Forward pass; returns the cross-entropy loss in nats.
  double forward_loss();
  /// Logits cached by the latest forward pass.
  void read_logits(std::vector<double>& out) const;
  /// Sum-product backward pass, accumulating scale * d(loss)/d(param).
  void accumulate_param_grads(std::vector<double>& grad, double scale);

  const ModelGraph& graph() const { return graph_; }
  Tape& tape() { return tape_; }
  int length() const { return length_; }

 private:
  ModelConfig cfg_;
  int length_;
  Tape tape_;
  ModelGraph graph_;
  NodeId loss_ = kNoNode;
  std::vector<typename SumProduct::Value> adjoints_;
};

TrainResult train_transformer(const ModelConfig& cfg, ParamStore& params, const Dataset& train,
                              const Dataset& val, const TrainConfig& tc);

int predict_transformer(const ModelConfig& cfg, const ParamStore& params,
                        std::span<const int> tokens, Tape& arena,
                        std::vector<double>* logits_out = nullptr);

double transformer_accuracy(const ModelConfig& cfg, const ParamStore& params, const Dataset& data);

/// Summed cross-entropy of the examples under the model, in nats.
double transformer_codelength(const ModelConfig& cfg, const ParamStore& params,
                              std::span<const Example> examples);

struct FeatureExample {
  std::vector<double> features;
  int label = 0;
};

struct FeatureDataset {
  int feature_count = 0;
  int classes = 2;
  std::vector<FeatureExample> examples;
};

/// Uniform features in [0, 1]; label = whether the first feature exceeds 0.5.
FeatureDataset make_threshold_dataset(int count, int features, std::uint64_t seed);

TrainResult train_mlp(const MlpConfig& cfg, ParamStore& params, const FeatureDataset& train,
                      const FeatureDataset& val, const TrainConfig& tc);

int predict_mlp(const MlpConfig& cfg, const ParamStore& params, std::span<const double> features,
                Tape& arena, std::vector<double>* logits_out = nullptr);

double mlp_accuracy(const MlpConfig& cfg, const ParamStore& params, const FeatureDataset& data);

// ---------------------------------------------------------------------------
// Snapshots: versioned binary parameter blob plus a JSON manifest.
// ---------------------------------------------------------------------------

void save_transformer_snapshot(const std::filesystem::path& prefix, const ModelConfig& cfg,
                               const ParamStore& params);
void save_mlp_snapshot(const std::filesystem::path& prefix, const MlpConfig& cfg,
                       const ParamStore& params);

struct Snapshot {
  std::string model;  // "transformer" or "mlp"
  ModelConfig transformer_config;
  MlpConfig mlp_config;
  ParamStore params;
};

Snapshot load_snapshot(const std::filesystem::path& prefix);

}  // namespace semigrad
