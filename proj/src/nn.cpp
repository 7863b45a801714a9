#include "semigrad/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "semigrad/backprop.hpp"

namespace semigrad {

using nlohmann::json;

void ModelConfig::validate() const {
  if (layers < 0) throw std::invalid_argument("layers must be non-negative");
  if (hidden < 2) throw std::invalid_argument("hidden size must be at least 2");
  if (heads < 1) throw std::invalid_argument("heads must be positive");
  if (hidden % heads != 0) throw std::invalid_argument("heads must divide hidden size");
  if (vocab < 2) throw std::invalid_argument("vocab must be at least 2");
  if (seq_len < 1) throw std::invalid_argument("seq_len must be positive");
  if (classes < 2) throw std::invalid_argument("classes must be at least 2");
  if (ffn_mult < 1) throw std::invalid_argument("ffn_mult must be positive");
  if (!(embed_init_std > 0.0) || !(attn_qk_init_gain > 0.0)) {
    throw std::invalid_argument("init scales must be positive");
  }
}

void MlpConfig::validate() const {
  if (in_features < 1) throw std::invalid_argument("in_features must be positive");
  if (hidden < 1) throw std::invalid_argument("hidden size must be positive");
  if (hidden_layers < 1) throw std::invalid_argument("hidden_layers must be positive");
  if (classes < 2) throw std::invalid_argument("classes must be at least 2");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
}

std::string_view readout_name(Readout r) {
  return r == Readout::MeanPool ? "mean" : "first";
}

Readout readout_from_name(std::string_view name) {
  if (name == "mean") return Readout::MeanPool;
  if (name == "first") return Readout::FirstToken;
  throw std::invalid_argument("unknown readout: " + std::string(name));
}

std::string_view branch_name(Branch b) {
  switch (b) {
    case Branch::Skip: return "skip";
    case Branch::Keys: return "keys";
    case Branch::Values: return "values";
    case Branch::Queries: return "queries";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

void ParamStore::add(std::string name, std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  entries_.push_back(Entry{std::move(name), std::move(shape), data_.size(), n});
  data_.resize(data_.size() + n, 0.0);
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw std::out_of_range("no parameter named " + name);
}

std::span<double> ParamStore::tensor(const std::string& name) {
  const Entry& e = entry(name);
  return std::span<double>(data_.data() + e.offset, e.size);
}

std::span<const double> ParamStore::tensor(const std::string& name) const {
  const Entry& e = entry(name);
  return std::span<const double>(data_.data() + e.offset, e.size);
}

void ParamStore::fill_normal(std::mt19937_64& rng, const std::string& name, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : tensor(name)) v = dist(rng);
}

void ParamStore::fill(const std::string& name, double value) {
  for (double& v : tensor(name)) v = value;
}

namespace {
std::string layer_name(int l, const char* suffix) {
  return "layer" + std::to_string(l) + "." + suffix;
}

double xavier_std(int fan_in, int fan_out) {
  return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
}
}  // namespace

ParamStore ParamStore::init_transformer(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.hidden;
  const int f = cfg.hidden * cfg.ffn_mult;
  ParamStore p;
  p.add("tok_embed", {cfg.vocab, d});
  p.add("pos_embed", {cfg.seq_len, d});
  for (int l = 0; l < cfg.layers; ++l) {
    p.add(layer_name(l, "attn.wq"), {d, d});
    p.add(layer_name(l, "attn.wk"), {d, d});
    p.add(layer_name(l, "attn.wv"), {d, d});
    p.add(layer_name(l, "attn.wo"), {d, d});
    p.add(layer_name(l, "ln1.gain"), {d});
    p.add(layer_name(l, "ln1.bias"), {d});
    p.add(layer_name(l, "ffn.w1"), {d, f});
    p.add(layer_name(l, "ffn.b1"), {f});
    p.add(layer_name(l, "ffn.w2"), {f, d});
    p.add(layer_name(l, "ffn.b2"), {d});
    p.add(layer_name(l, "ln2.gain"), {d});
    p.add(layer_name(l, "ln2.bias"), {d});
  }
  p.add("head.w", {d, cfg.classes});
  p.add("head.b", {cfg.classes});

  std::mt19937_64 rng(cfg.seed);
  p.fill_normal(rng, "tok_embed", cfg.embed_init_std);
  p.fill_normal(rng, "pos_embed", cfg.embed_init_std);
  for (int l = 0; l < cfg.layers; ++l) {
    p.fill_normal(rng, layer_name(l, "attn.wq"), cfg.attn_qk_init_gain * xavier_std(d, d));
    p.fill_normal(rng, layer_name(l, "attn.wk"), cfg.attn_qk_init_gain * xavier_std(d, d));
    p.fill_normal(rng, layer_name(l, "attn.wv"), xavier_std(d, d));
    p.fill_normal(rng, layer_name(l, "attn.wo"), xavier_std(d, d));
    p.fill(layer_name(l, "ln1.gain"), 1.0);
    p.fill_normal(rng, layer_name(l, "ffn.w1"), xavier_std(d, f));
    p.fill_normal(rng, layer_name(l, "ffn.w2"), xavier_std(f, d));
    p.fill(layer_name(l, "ln2.gain"), 1.0);
  }
  p.fill_normal(rng, "head.w", xavier_std(d, cfg.classes));
  return p;
}

ParamStore ParamStore::init_mlp(const MlpConfig& cfg) {
  cfg.validate();
  ParamStore p;
  int in = cfg.in_features;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    p.add(layer_name(l, "w"), {in, cfg.hidden});
    p.add(layer_name(l, "b"), {cfg.hidden});
    in = cfg.hidden;
  }
  p.add("head.w", {in, cfg.classes});
  p.add("head.b", {cfg.classes});

  std::mt19937_64 rng(cfg.seed);
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    // Wider fan-in friendly init than the transformer's fixed stddev.
    const auto& e = p.entry(layer_name(l, "w"));
    p.fill_normal(rng, e.name, 1.0 / std::sqrt(static_cast<double>(e.shape[0])));
  }
  p.fill_normal(rng, "head.w", 1.0 / std::sqrt(static_cast<double>(in)));
  return p;
}

// ---------------------------------------------------------------------------
// Graph construction
// ---------------------------------------------------------------------------

namespace {

/// Emits every parameter as a tape input, in flat store order.
std::vector<NodeId> emit_param_inputs(Tape& tape, const ParamStore& params) {
  std::vector<NodeId> nodes;
  nodes.reserve(params.size());
  for (double v : params.values()) nodes.push_back(tape.add_input(v));
  return nodes;
}

TensorRef param_view(const ParamStore& params, const std::vector<NodeId>& nodes,
                     const std::string& name) {
  const auto& e = params.entry(name);
  TensorRef t;
  t.shape = e.shape;
  t.nodes.assign(nodes.begin() + static_cast<long>(e.offset),
                 nodes.begin() + static_cast<long>(e.offset + e.size));
  return t;
}

TensorRef row_view(const TensorRef& matrix, int row) {
  TensorRef t;
  t.shape = {matrix.cols()};
  t.nodes.reserve(static_cast<std::size_t>(matrix.cols()));
  for (int j = 0; j < matrix.cols(); ++j) t.nodes.push_back(matrix.at(row, j));
  return t;
}

TensorRef as_row_matrix(const TensorRef& v) {
  TensorRef t;
  t.shape = {1, static_cast<int>(v.numel())};
  t.nodes = v.nodes;
  return t;
}

TensorRef as_vector(const TensorRef& m) {
  TensorRef t;
  t.shape = {static_cast<int>(m.numel())};
  t.nodes = m.nodes;
  return t;
}

TensorRef affine(Tape& tape, const TensorRef& x, const TensorRef& w, const TensorRef& b) {
  return ewise_binary(tape, OpKind::Add, as_vector(matmul(tape, as_row_matrix(x), w)), b);
}

TensorRef identity_copy(Tape& tape, const TensorRef& x) {
  return ewise_unary(tape, OpKind::Id, x);
}

TensorRef mean_over(Tape& tape, const std::vector<TensorRef>& rows) {
  const std::size_t dim = rows.front().numel();
  const NodeId inv = tape.add_const(1.0 / static_cast<double>(rows.size()));
  TensorRef out;
  out.shape = {static_cast<int>(dim)};
  out.nodes.reserve(dim);
  std::vector<NodeId> column(rows.size());
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t p = 0; p < rows.size(); ++p) column[p] = rows[p].nodes[j];
    out.nodes.push_back(tape.add_binary(OpKind::Mul, sum_nodes(tape, column), inv));
  }
  return out;
}

}  // namespace

ModelGraph build_transformer(Tape& tape, const ModelConfig& cfg, const ParamStore& params,
                             std::span<const int> tokens) {
  cfg.validate();
  const int len = static_cast<int>(tokens.size());
  if (len < 1 || len > cfg.seq_len) {
    throw std::invalid_argument("token sequence length must lie in [1, seq_len]");
  }
  for (int t : tokens) {
    if (t < 1 || t > cfg.vocab) throw std::out_of_range("token outside the vocabulary");
  }
  const int d = cfg.hidden;
  const int heads = cfg.heads;
  const int dh = d / heads;

  ModelGraph g;
  g.param_nodes = emit_param_inputs(tape, params);
  const TensorRef tok_embed = param_view(params, g.param_nodes, "tok_embed");
  const TensorRef pos_embed = param_view(params, g.param_nodes, "pos_embed");

  // Embeddings: per-position identity copies of the token's row keep every
  // position's node set distinct, then the position row is added in.
  std::vector<TensorRef> h(static_cast<std::size_t>(len));
  g.token_inputs.resize(static_cast<std::size_t>(len));
  for (int p = 0; p < len; ++p) {
    TensorRef row = embedding_row(tape, tok_embed, tokens[static_cast<std::size_t>(p)] - 1);
    g.token_inputs[static_cast<std::size_t>(p)] = row.nodes;
    h[static_cast<std::size_t>(p)] = ewise_binary(tape, OpKind::Add, row, row_view(pos_embed, p));
  }

  g.anchors.ids.resize(static_cast<std::size_t>(cfg.layers));
  for (int l = 0; l < cfg.layers; ++l) {
    const TensorRef wq = param_view(params, g.param_nodes, layer_name(l, "attn.wq"));
    const TensorRef wk = param_view(params, g.param_nodes, layer_name(l, "attn.wk"));
    const TensorRef wv = param_view(params, g.param_nodes, layer_name(l, "attn.wv"));
    const TensorRef wo = param_view(params, g.param_nodes, layer_name(l, "attn.wo"));
    const TensorRef ln1_gain = param_view(params, g.param_nodes, layer_name(l, "ln1.gain"));
    const TensorRef ln1_bias = param_view(params, g.param_nodes, layer_name(l, "ln1.bias"));
    const TensorRef w1 = param_view(params, g.param_nodes, layer_name(l, "ffn.w1"));
    const TensorRef b1 = param_view(params, g.param_nodes, layer_name(l, "ffn.b1"));
    const TensorRef w2 = param_view(params, g.param_nodes, layer_name(l, "ffn.w2"));
    const TensorRef b2 = param_view(params, g.param_nodes, layer_name(l, "ffn.b2"));
    const TensorRef ln2_gain = param_view(params, g.param_nodes, layer_name(l, "ln2.gain"));
    const TensorRef ln2_bias = param_view(params, g.param_nodes, layer_name(l, "ln2.bias"));

    auto& layer_anchors = g.anchors.ids[static_cast<std::size_t>(l)];
    layer_anchors.resize(static_cast<std::size_t>(len));

    // The branching point: each position's hidden state fans out through
    // exactly four identity sets.
    std::vector<TensorRef> skip(static_cast<std::size_t>(len)), q(static_cast<std::size_t>(len)),
        k(static_cast<std::size_t>(len)), v(static_cast<std::size_t>(len));
    for (int p = 0; p < len; ++p) {
      const TensorRef skip_a = identity_copy(tape, h[static_cast<std::size_t>(p)]);
      const TensorRef keys_a = identity_copy(tape, h[static_cast<std::size_t>(p)]);
      const TensorRef vals_a = identity_copy(tape, h[static_cast<std::size_t>(p)]);
      const TensorRef qrys_a = identity_copy(tape, h[static_cast<std::size_t>(p)]);
      auto& slots = layer_anchors[static_cast<std::size_t>(p)];
      slots[static_cast<int>(Branch::Skip)] = skip_a.nodes;
      slots[static_cast<int>(Branch::Keys)] = keys_a.nodes;
      slots[static_cast<int>(Branch::Values)] = vals_a.nodes;
      slots[static_cast<int>(Branch::Queries)] = qrys_a.nodes;
      skip[static_cast<std::size_t>(p)] = skip_a;
      k[static_cast<std::size_t>(p)] = as_vector(matmul(tape, as_row_matrix(keys_a), wk));
      v[static_cast<std::size_t>(p)] = as_vector(matmul(tape, as_row_matrix(vals_a), wv));
      q[static_cast<std::size_t>(p)] = as_vector(matmul(tape, as_row_matrix(qrys_a), wq));
    }

    const NodeId inv_sqrt_dh = tape.add_const(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<TensorRef> attn_out(static_cast<std::size_t>(len));
    std::vector<NodeId> terms(static_cast<std::size_t>(dh));
    for (int p = 0; p < len; ++p) {
      TensorRef ctx;
      ctx.shape = {d};
      ctx.nodes.resize(static_cast<std::size_t>(d));
      for (int a = 0; a < heads; ++a) {
        const int base = a * dh;
        TensorRef scores;
        scores.shape = {len};
        scores.nodes.reserve(static_cast<std::size_t>(len));
        for (int s = 0; s < len; ++s) {
          for (int j = 0; j < dh; ++j) {
            terms[static_cast<std::size_t>(j)] =
                tape.add_binary(OpKind::Mul, q[static_cast<std::size_t>(p)].at(base + j),
                                k[static_cast<std::size_t>(s)].at(base + j));
          }
          scores.nodes.push_back(
              tape.add_binary(OpKind::Mul, sum_nodes(tape, terms), inv_sqrt_dh));
        }
        const TensorRef weights = softmax(tape, scores);
        std::vector<NodeId> mix(static_cast<std::size_t>(len));
        for (int j = 0; j < dh; ++j) {
          for (int s = 0; s < len; ++s) {
            mix[static_cast<std::size_t>(s)] =
                tape.add_binary(OpKind::Mul, weights.at(s), v[static_cast<std::size_t>(s)].at(base + j));
          }
          ctx.nodes[static_cast<std::size_t>(base + j)] = sum_nodes(tape, mix);
        }
      }
      attn_out[static_cast<std::size_t>(p)] = as_vector(matmul(tape, as_row_matrix(ctx), wo));
    }

    for (int p = 0; p < len; ++p) {
      const TensorRef sum1 = ewise_binary(tape, OpKind::Add, skip[static_cast<std::size_t>(p)],
                                          attn_out[static_cast<std::size_t>(p)]);
      const TensorRef x1 = layer_norm(tape, sum1, ln1_gain, ln1_bias);
      const TensorRef f1 = ewise_unary(tape, OpKind::Relu, affine(tape, x1, w1, b1));
      const TensorRef f2 = affine(tape, f1, w2, b2);
      const TensorRef sum2 = ewise_binary(tape, OpKind::Add, x1, f2);
      h[static_cast<std::size_t>(p)] = layer_norm(tape, sum2, ln2_gain, ln2_bias);
    }
  }

  const TensorRef summary = cfg.readout == Readout::MeanPool ? mean_over(tape, h) : h[0];
  g.logits = affine(tape, summary, param_view(params, g.param_nodes, "head.w"),
                    param_view(params, g.param_nodes, "head.b"));
  return g;
}

MlpGraph build_mlp(Tape& tape, const MlpConfig& cfg, const ParamStore& params,
                   std::span<const double> features) {
  cfg.validate();
  if (static_cast<int>(features.size()) != cfg.in_features) {
    throw std::invalid_argument("feature count does not match the model");
  }
  MlpGraph g;
  g.param_nodes = emit_param_inputs(tape, params);
  TensorRef x = tensor_inputs(tape, {cfg.in_features}, features);
  g.feature_inputs = x.nodes;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    const TensorRef w = param_view(params, g.param_nodes, layer_name(l, "w"));
    const TensorRef b = param_view(params, g.param_nodes, layer_name(l, "b"));
    x = ewise_unary(tape, OpKind::Relu, affine(tape, x, w, b));
  }
  g.logits = affine(tape, x, param_view(params, g.param_nodes, "head.w"),
                    param_view(params, g.param_nodes, "head.b"));
  return g;
}

NodeId append_cross_entropy(Tape& tape, const TensorRef& logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.numel())) {
    throw std::out_of_range("cross-entropy label outside the logit range");
  }
  const NodeId peak = tape.add_peek_max(logits.nodes);
  std::vector<NodeId> exps;
  exps.reserve(logits.numel());
  for (NodeId z : logits.nodes) {
    exps.push_back(tape.add_unary(OpKind::Exp, tape.add_binary(OpKind::Sub, z, peak)));
  }
  const NodeId lse = tape.add_binary(OpKind::Add, peak,
                                     tape.add_unary(OpKind::Log, sum_nodes(tape, exps)));
  return tape.add_binary(OpKind::Sub, lse, logits.at(label));
}

NodeId append_decision_margin(Tape& tape, const TensorRef& logits, int true_class, int rival) {
  const int n = static_cast<int>(logits.numel());
  if (true_class < 0 || true_class >= n || rival < 0 || rival >= n) {
    throw std::out_of_range("decision margin classes outside the logit range");
  }
  if (true_class == rival) throw std::invalid_argument("decision margin needs distinct classes");
  return tape.add_binary(OpKind::Sub, logits.at(true_class), logits.at(rival));
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
};

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& st,
               const TrainConfig& tc) {
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(tc.adam_beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(tc.adam_beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = tc.adam_beta1 * st.m[i] + (1.0 - tc.adam_beta1) * grad[i];
    st.v[i] = tc.adam_beta2 * st.v[i] + (1.0 - tc.adam_beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= tc.learning_rate * mhat / (std::sqrt(vhat) + tc.adam_eps);
  }
}

/// Shared single-threaded training loop; Problem supplies per-example loss
/// gradients and validation accuracy.
template <class Problem>
TrainResult run_training(Problem& prob, ParamStore& params, std::size_t train_count,
                         const TrainConfig& tc) {
  tc.validate();
  if (train_count == 0) throw std::invalid_argument("training set is empty");
  TrainResult result;
  AdamState adam;
  std::mt19937_64 rng(tc.seed);
  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(params.size(), 0.0);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t cursor = 0;
    prob.bind_params(params);
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), cursor + static_cast<std::size_t>(tc.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      const double inv_batch = 1.0 / static_cast<double>(batch_end - cursor);
      for (; cursor < batch_end; ++cursor) {
        const double loss_value = prob.example_loss_grad(order[cursor], grad, inv_batch);
        if (!std::isfinite(loss_value)) {
          result.diverged = true;
          result.epochs.push_back({loss_value, 0.0});
          return result;
        }
        loss_sum += loss_value;
      }
      adam_step(params.values(), grad, adam, tc);
      prob.bind_params(params);
    }
    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(train_count);
    stats.val_accuracy = prob.validation_accuracy(params);
    result.epochs.push_back(stats);
    result.final_val_accuracy = stats.val_accuracy;
    if (stats.val_accuracy >= tc.accuracy_gate) {
      result.reached_gate = true;
      break;
    }
  }
  return result;
}

struct TransformerProblem {
  const ModelConfig& cfg;
  const Dataset& train;
  const Dataset& val;
  TransformerRunner runner;

  TransformerProblem(const ModelConfig& c, const Dataset& tr, const Dataset& v)
      : cfg(c), train(tr), val(v), runner(c, tr.examples.empty()
                                                 ? c.seq_len
                                                 : static_cast<int>(tr.examples[0].tokens.size())) {}

  void bind_params(const ParamStore& params) { runner.set_params(params); }

  double example_loss_grad(std::size_t idx, std::vector<double>& grad, double scale) {
    const Example& ex = train.examples[idx];
    runner.set_example(ex.tokens, ex.label);
    const double loss = runner.forward_loss();
    if (std::isfinite(loss)) runner.accumulate_param_grads(grad, scale);
    return loss;
  }

  double validation_accuracy(const ParamStore& params) const {
    return transformer_accuracy(cfg, params, val);
  }
};

struct MlpProblem {
  const MlpConfig& cfg;
  const FeatureDataset& train;
  const FeatureDataset& val;
  const ParamStore* params = nullptr;
  Tape arena;
  std::vector<double> adjoints;

  MlpProblem(const MlpConfig& c, const FeatureDataset& tr, const FeatureDataset& v)
      : cfg(c), train(tr), val(v) {}

  void bind_params(const ParamStore& p) { params = &p; }

  double example_loss_grad(std::size_t idx, std::vector<double>& grad, double scale) {
    const FeatureExample& ex = train.examples[idx];
    arena.clear();
    MlpGraph g = build_mlp(arena, cfg, *params, ex.features);
    arena.set_output(append_cross_entropy(arena, g.logits, ex.label));
    const double loss = arena.forward();
    if (!std::isfinite(loss)) return loss;
    backprop_into<SumProduct>(arena, adjoints);
    for (std::size_t i = 0; i < g.param_nodes.size(); ++i) {
      grad[i] += adjoints[static_cast<std::size_t>(g.param_nodes[i])] * scale;
    }
    return loss;
  }

  double validation_accuracy(const ParamStore& p) const { return mlp_accuracy(cfg, p, val); }
};

int argmax_class(std::span<const double> logits) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(logits.size()); ++c) {
    if (logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// TransformerRunner
// ---------------------------------------------------------------------------

TransformerRunner::TransformerRunner(const ModelConfig& cfg, int length)
    : cfg_(cfg), length_(length) {
  cfg_.validate();
  if (length_ < 1 || length_ > cfg_.seq_len) {
    throw std::invalid_argument("runner length must lie in [1, seq_len]");
  }
  // Placeholder tokens; every later example only re-points the lookups.
  const ParamStore zeros = ParamStore::init_transformer(cfg_);
  const std::vector<int> dummy(static_cast<std::size_t>(length_), 1);
  graph_ = build_transformer(tape_, cfg_, zeros, dummy);
  loss_ = append_cross_entropy(tape_, graph_.logits, 0);
  tape_.set_output(loss_);
}

void TransformerRunner::set_params(const ParamStore& params) {
  if (params.size() != graph_.param_nodes.size()) {
    throw std::invalid_argument("parameter store does not match the runner's model");
  }
  const auto values = params.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    // Parameter inputs were created first, in flat order.
    tape_.set_input(i, values[i]);
  }
}

void TransformerRunner::set_example(std::span<const int> tokens, int label) {
  if (static_cast<int>(tokens.size()) != length_) {
    throw std::invalid_argument("runner built for a different sequence length");
  }
  if (label < 0 || label >= cfg_.classes) throw std::out_of_range("label outside classes");
  const auto& table = graph_.param_nodes;
  const std::size_t table_offset = 0;  // tok_embed is the first parameter block
  const int d = cfg_.hidden;
  for (int p = 0; p < length_; ++p) {
    const int token = tokens[static_cast<std::size_t>(p)];
    if (token < 1 || token > cfg_.vocab) throw std::out_of_range("token outside the vocabulary");
    const auto& ids = graph_.token_inputs[static_cast<std::size_t>(p)];
    for (int j = 0; j < d; ++j) {
      tape_.set_parent(ids[static_cast<std::size_t>(j)], 0,
                       table[table_offset + static_cast<std::size_t>(token - 1) *
                                                 static_cast<std::size_t>(d) +
                             static_cast<std::size_t>(j)]);
    }
  }
  // loss = lse - logits[label]
  tape_.set_parent(loss_, 1, graph_.logits.at(label));
}

double TransformerRunner::forward_loss() {
  tape_.set_output(loss_);
  return tape_.forward();
}

void TransformerRunner::read_logits(std::vector<double>& out) const {
  out.resize(graph_.logits.numel());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = tape_.value(graph_.logits.nodes[c]);
}

void TransformerRunner::accumulate_param_grads(std::vector<double>& grad, double scale) {
  backprop_into<SumProduct>(tape_, adjoints_);
  for (std::size_t i = 0; i < graph_.param_nodes.size(); ++i) {
    grad[i] += adjoints_[static_cast<std::size_t>(graph_.param_nodes[i])] * scale;
  }
}

TrainResult train_transformer(const ModelConfig& cfg, ParamStore& params, const Dataset& train,
                              const Dataset& val, const TrainConfig& tc) {
  TransformerProblem prob(cfg, train, val);
  return run_training(prob, params, train.examples.size(), tc);
}

int predict_transformer(const ModelConfig& cfg, const ParamStore& params,
                        std::span<const int> tokens, Tape& arena,
                        std::vector<double>* logits_out) {
  arena.clear();
  ModelGraph g = build_transformer(arena, cfg, params, tokens);
  arena.set_output(g.logits.at(0));
  arena.forward();
  std::vector<double> logits(g.logits.numel());
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = arena.value(g.logits.nodes[c]);
  if (logits_out) *logits_out = logits;
  return argmax_class(logits);
}

double transformer_accuracy(const ModelConfig& cfg, const ParamStore& params,
                            const Dataset& data) {
  if (data.examples.empty()) return 0.0;
  TransformerRunner runner(cfg, static_cast<int>(data.examples[0].tokens.size()));
  runner.set_params(params);
  std::vector<double> logits;
  std::size_t hits = 0;
  for (const auto& ex : data.examples) {
    runner.set_example(ex.tokens, ex.label);
    runner.forward_loss();
    runner.read_logits(logits);
    if (argmax_class(logits) == ex.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.examples.size());
}

double transformer_codelength(const ModelConfig& cfg, const ParamStore& params,
                              std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  TransformerRunner runner(cfg, static_cast<int>(examples[0].tokens.size()));
  runner.set_params(params);
  double total = 0.0;
  for (const auto& ex : examples) {
    runner.set_example(ex.tokens, ex.label);
    total += runner.forward_loss();
  }
  return total;
}

FeatureDataset make_threshold_dataset(int count, int features, std::uint64_t seed) {
  if (count < 1 || features < 1) throw std::invalid_argument("dataset dimensions must be positive");
  FeatureDataset data;
  data.feature_count = features;
  data.classes = 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  data.examples.resize(static_cast<std::size_t>(count));
  for (auto& ex : data.examples) {
    ex.features.resize(static_cast<std::size_t>(features));
    for (double& f : ex.features) f = unit(rng);
    ex.label = ex.features[0] > 0.5 ? 1 : 0;
  }
  return data;
}

TrainResult train_mlp(const MlpConfig& cfg, ParamStore& params, const FeatureDataset& train,
                      const FeatureDataset& val, const TrainConfig& tc) {
  MlpProblem prob{cfg, train, val};
  return run_training(prob, params, train.examples.size(), tc);
}

int predict_mlp(const MlpConfig& cfg, const ParamStore& params, std::span<const double> features,
                Tape& arena, std::vector<double>* logits_out) {
  arena.clear();
  MlpGraph g = build_mlp(arena, cfg, params, features);
  arena.set_output(g.logits.at(0));
  arena.forward();
  std::vector<double> logits(g.logits.numel());
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = arena.value(g.logits.nodes[c]);
  if (logits_out) *logits_out = logits;
  return argmax_class(logits);
}

double mlp_accuracy(const MlpConfig& cfg, const ParamStore& params, const FeatureDataset& data) {
  if (data.examples.empty()) return 0.0;
  Tape arena;
  std::size_t hits = 0;
  for (const auto& ex : data.examples) {
    if (predict_mlp(cfg, params, ex.features, arena) == ex.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.examples.size());
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

namespace {
constexpr char kParamMagic[] = "SGPARAMS1\n";
constexpr int kSnapshotVersion = 1;

json model_config_json(const ModelConfig& c) {
  return json{{"layers", c.layers},   {"hidden", c.hidden},     {"heads", c.heads},
              {"vocab", c.vocab},     {"seq_len", c.seq_len},   {"classes", c.classes},
              {"ffn_mult", c.ffn_mult}, {"readout", std::string(readout_name(c.readout))},
              {"embed_init_std", c.embed_init_std},
              {"attn_qk_init_gain", c.attn_qk_init_gain},
              {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.layers = j.at("layers").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.heads = j.at("heads").get<int>();
  c.vocab = j.at("vocab").get<int>();
  c.seq_len = j.at("seq_len").get<int>();
  c.classes = j.at("classes").get<int>();
  c.ffn_mult = j.at("ffn_mult").get<int>();
  c.readout = readout_from_name(j.value("readout", "mean"));
  c.embed_init_std = j.value("embed_init_std", 0.1);
  c.attn_qk_init_gain = j.value("attn_qk_init_gain", 3.0);
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json mlp_config_json(const MlpConfig& c) {
  return json{{"in_features", c.in_features},
              {"hidden", c.hidden},
              {"hidden_layers", c.hidden_layers},
              {"classes", c.classes},
              {"seed", c.seed}};
}

MlpConfig mlp_config_from_json(const json& j) {
  MlpConfig c;
  c.in_features = j.at("in_features").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.hidden_layers = j.at("hidden_layers").get<int>();
  c.classes = j.at("classes").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void save_snapshot_files(const std::filesystem::path& prefix, const std::string& model,
                         const json& config, const ParamStore& params) {
  const std::filesystem::path param_path = prefix.string() + ".params";
  const std::filesystem::path manifest_path = prefix.string() + ".json";
  {
    std::ofstream out(param_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + param_path.string());
    out.write(kParamMagic, sizeof(kParamMagic) - 1);
    const std::uint64_t n = params.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(params.values().data()),
              static_cast<std::streamsize>(n * sizeof(double)));
  }
  json entries = json::array();
  for (const auto& e : params.entries()) {
    entries.push_back(json{{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
  }
  const json manifest{{"format", "semigrad-snapshot"},
                      {"version", kSnapshotVersion},
                      {"model", model},
                      {"config", config},
                      {"param_file", param_path.filename().string()},
                      {"param_count", params.size()},
                      {"entries", entries}};
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write " + manifest_path.string());
  out << manifest.dump(2) << "\n";
}
}  // namespace

void save_transformer_snapshot(const std::filesystem::path& prefix, const ModelConfig& cfg,
                               const ParamStore& params) {
  save_snapshot_files(prefix, "transformer", model_config_json(cfg), params);
}

void save_mlp_snapshot(const std::filesystem::path& prefix, const MlpConfig& cfg,
                       const ParamStore& params) {
  save_snapshot_files(prefix, "mlp", mlp_config_json(cfg), params);
}

Snapshot load_snapshot(const std::filesystem::path& prefix) {
  const std::filesystem::path manifest_path = prefix.string() + ".json";
  std::ifstream manifest_in(manifest_path);
  if (!manifest_in) throw std::runtime_error("cannot open " + manifest_path.string());
  json manifest;
  manifest_in >> manifest;
  if (manifest.value("format", "") != "semigrad-snapshot" ||
      manifest.value("version", 0) != kSnapshotVersion) {
    throw std::runtime_error("unsupported snapshot manifest");
  }
  Snapshot snap;
  snap.model = manifest.at("model").get<std::string>();
  if (snap.model == "transformer") {
    snap.transformer_config = model_config_from_json(manifest.at("config"));
    snap.params = ParamStore::init_transformer(snap.transformer_config);
  } else if (snap.model == "mlp") {
    snap.mlp_config = mlp_config_from_json(manifest.at("config"));
    snap.params = ParamStore::init_mlp(snap.mlp_config);
  } else {
    throw std::runtime_error("unknown snapshot model kind: " + snap.model);
  }

  const std::filesystem::path param_path =
      prefix.parent_path() / manifest.at("param_file").get<std::string>();
  std::ifstream in(param_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + param_path.string());
  char magic[sizeof(kParamMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("bad parameter file magic");
  }
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n != snap.params.size()) {
    throw std::runtime_error("parameter count disagrees with the model config");
  }
  in.read(reinterpret_cast<char*>(snap.params.values().data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated parameter file");
  return snap;
}

}  // namespace semigrad
