#include "semigrad/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "semigrad/backprop.hpp"

namespace semigrad {

namespace {

int rival_class(std::span<const double> logits, int true_class) {
  int rival = true_class == 0 ? 1 : 0;
  for (int c = 0; c < static_cast<int>(logits.size()); ++c) {
    if (c == true_class) continue;
    if (logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(rival)]) rival = c;
  }
  return rival;
}

int argmax_logit(std::span<const double> logits) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(logits.size()); ++c) {
    if (logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

/// Builds the model and the decision-margin output for one example; returns
/// the graph with the tape forwarded and ready for backward passes.
struct MarginGraph {
  ModelGraph graph;
  int predicted = -1;
  int rival = -1;
};

MarginGraph build_margin_graph(Tape& tape, const ModelConfig& cfg, const ParamStore& params,
                               std::span<const int> tokens, int label) {
  tape.clear();
  MarginGraph out;
  out.graph = build_transformer(tape, cfg, params, tokens);
  tape.set_output(out.graph.logits.at(0));
  tape.forward();
  std::vector<double> logits(out.graph.logits.numel());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    logits[c] = tape.value(out.graph.logits.nodes[c]);
  }
  out.predicted = argmax_logit(logits);
  out.rival = rival_class(logits, label);
  const NodeId margin = append_decision_margin(tape, out.graph.logits, label, out.rival);
  tape.set_output(margin);
  tape.forward();
  return out;
}

}  // namespace

std::string_view token_type_name(TokenType t) {
  switch (t) {
    case TokenType::First: return "first";
    case TokenType::Repeat: return "repeat";
    case TokenType::Other: return "other";
  }
  return "unknown";
}

TokenType classify_position(std::span<const int> tokens, int position) {
  if (position == 0) return TokenType::First;
  return tokens[static_cast<std::size_t>(position)] == tokens[0] ? TokenType::Repeat
                                                                 : TokenType::Other;
}

BranchReport branch_attribution(const ModelConfig& cfg, const ParamStore& params,
                                std::span<const int> tokens, int label) {
  Tape tape;
  const MarginGraph mg = build_margin_graph(tape, cfg, params, tokens, label);
  BranchReport report;
  report.predicted = mg.predicted;
  report.label = label;
  report.rival = mg.rival;
  report.correct = mg.predicted == label;

  const auto store = backprop<MaxProduct>(tape);
  for (std::size_t layer = 0; layer < mg.graph.anchors.ids.size(); ++layer) {
    const auto& positions = mg.graph.anchors.ids[layer];
    for (std::size_t pos = 0; pos < positions.size(); ++pos) {
      PositionBranchRow row;
      row.layer = static_cast<int>(layer);
      row.position = static_cast<int>(pos);
      double abs_total = 0.0;
      for (int b = 0; b < kBranchCount; ++b) {
        const auto agg = aggregate<MaxProduct>(store, positions[pos][static_cast<std::size_t>(b)]);
        row.reachable[static_cast<std::size_t>(b)] = !agg.empty;
        row.value[static_cast<std::size_t>(b)] = agg.empty ? 0.0 : agg.hi;
        if (!agg.empty) abs_total += std::fabs(agg.hi);
      }
      for (int b = 0; b < kBranchCount; ++b) {
        if (!row.reachable[static_cast<std::size_t>(b)]) continue;
        if (row.argmax_branch < 0 ||
            row.value[static_cast<std::size_t>(b)] >
                row.value[static_cast<std::size_t>(row.argmax_branch)]) {
          row.argmax_branch = b;
        }
      }
      if (abs_total > 0.0) {
        for (int b = 0; b < kBranchCount; ++b) {
          row.normalized_abs[static_cast<std::size_t>(b)] =
              std::fabs(row.value[static_cast<std::size_t>(b)]) / abs_total;
        }
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

BranchSummary summarize_final_layer(const ModelConfig& cfg, const ParamStore& params,
                                    std::span<const Example> examples) {
  BranchSummary summary;
  if (cfg.layers == 0) return summary;
  std::array<std::array<std::size_t, kBranchCount>, kTokenTypeCount> argmax_counts{};
  std::array<std::array<double, kBranchCount>, kTokenTypeCount> abs_sums{};
  std::array<std::size_t, kTokenTypeCount> totals{};

  for (const auto& ex : examples) {
    const BranchReport report = branch_attribution(cfg, params, ex.tokens, ex.label);
    if (!report.correct) {
      ++summary.examples_skipped;
      continue;
    }
    ++summary.examples_used;
    for (const auto& row : report.rows) {
      if (row.layer != cfg.layers - 1) continue;
      const auto type = static_cast<std::size_t>(classify_position(ex.tokens, row.position));
      ++totals[type];
      if (row.argmax_branch >= 0) {
        ++argmax_counts[type][static_cast<std::size_t>(row.argmax_branch)];
      }
      for (int b = 0; b < kBranchCount; ++b) {
        abs_sums[type][static_cast<std::size_t>(b)] +=
            std::fabs(row.value[static_cast<std::size_t>(b)]);
      }
    }
  }
  for (int t = 0; t < kTokenTypeCount; ++t) {
    summary.positions_seen[static_cast<std::size_t>(t)] = totals[static_cast<std::size_t>(t)];
    if (totals[static_cast<std::size_t>(t)] == 0) continue;
    const double inv = 1.0 / static_cast<double>(totals[static_cast<std::size_t>(t)]);
    for (int b = 0; b < kBranchCount; ++b) {
      summary.argmax_share[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] =
          static_cast<double>(argmax_counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)]) *
          inv;
      summary.mean_abs_value[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] =
          abs_sums[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] * inv;
    }
  }
  return summary;
}

namespace {

EntropyReport entropy_rows_from_store(const std::vector<LogWeightedMass>& store,
                                      const std::vector<std::vector<NodeId>>& sets) {
  EntropyReport report;
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto agg = aggregate<LogEntropy>(store, sets[i]);
    const EntropyStat stat = LogEntropy::finalize(agg);
    report.rows.push_back(InputEntropyRow{static_cast<int>(i), stat.nats, stat.defined});
    if (stat.defined) {
      total += stat.nats;
      ++defined;
    } else {
      ++report.undefined_rows;
    }
  }
  report.mean_nats = defined > 0 ? total / static_cast<double>(defined) : 0.0;
  return report;
}

}  // namespace

EntropyReport entropy_of_inputs(const ModelConfig& cfg, const ParamStore& params,
                                std::span<const int> tokens, int label) {
  Tape tape;
  const MarginGraph mg = build_margin_graph(tape, cfg, params, tokens, label);
  const auto store = backprop<LogEntropy>(tape);
  EntropyReport report = entropy_rows_from_store(store, mg.graph.token_inputs);
  report.predicted = mg.predicted;
  report.label = label;
  report.correct = mg.predicted == label;
  return report;
}

EntropyReport entropy_of_features(const MlpConfig& cfg, const ParamStore& params,
                                  std::span<const double> features, int label) {
  Tape tape;
  MlpGraph g = build_mlp(tape, cfg, params, features);
  tape.set_output(g.logits.at(0));
  tape.forward();
  std::vector<double> logits(g.logits.numel());
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = tape.value(g.logits.nodes[c]);
  const int predicted = argmax_logit(logits);
  const int rival = rival_class(logits, label);
  const NodeId margin = append_decision_margin(tape, g.logits, label, rival);
  tape.set_output(margin);
  tape.forward();

  const auto store = backprop<LogEntropy>(tape);
  std::vector<std::vector<NodeId>> sets;
  sets.reserve(g.feature_inputs.size());
  for (NodeId n : g.feature_inputs) sets.push_back({n});
  EntropyReport report = entropy_rows_from_store(store, sets);
  report.predicted = predicted;
  report.label = label;
  report.correct = predicted == label;
  return report;
}

std::vector<LengthSweepRow> entropy_length_sweep(const ModelConfig& cfg, const ParamStore& params,
                                                 std::span<const int> lengths, int examples,
                                                 std::uint64_t seed) {
  std::vector<LengthSweepRow> rows;
  for (int len : lengths) {
    if (len < 1 || len > cfg.seq_len) {
      throw std::invalid_argument("sweep length outside [1, seq_len]");
    }
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(len)));
    LengthSweepRow row;
    row.length = len;
    double total = 0.0;
    std::size_t counted = 0;
    for (int i = 0; i < examples; ++i) {
      std::vector<int> tokens(static_cast<std::size_t>(len));
      for (auto& t : tokens) {
        t = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.vocab)) + 1;
      }
      const EntropyReport rep = entropy_of_inputs(cfg, params, tokens, 1);
      if (rep.rows.size() != rep.undefined_rows) {
        total += rep.mean_nats;
        ++counted;
      }
    }
    row.examples = counted;
    row.mean_entropy = counted > 0 ? total / static_cast<double>(counted) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

HiddenSweepRow mlp_entropy_for_hidden(int hidden, int hidden_layers, int train_count,
                                      int eval_count, const TrainConfig& tc, std::uint64_t seed) {
  MlpConfig cfg;
  cfg.in_features = 4;
  cfg.hidden = hidden;
  cfg.hidden_layers = hidden_layers;
  cfg.classes = 2;
  cfg.seed = seed;

  const FeatureDataset train = make_threshold_dataset(train_count, cfg.in_features, seed);
  const FeatureDataset val = make_threshold_dataset(eval_count, cfg.in_features, seed + 1);
  ParamStore params = ParamStore::init_mlp(cfg);
  const TrainResult tr = train_mlp(cfg, params, train, val, tc);

  HiddenSweepRow row;
  row.hidden = hidden;
  row.val_accuracy = tr.final_val_accuracy;
  double mean_sum = 0.0, relevant_sum = 0.0, irrelevant_sum = 0.0;
  std::size_t counted = 0;
  for (const auto& ex : val.examples) {
    const EntropyReport rep = entropy_of_features(cfg, params, ex.features, ex.label);
    if (rep.undefined_rows == rep.rows.size()) continue;
    double irr = 0.0;
    int irr_n = 0;
    for (const auto& r : rep.rows) {
      if (!r.defined) continue;
      if (r.index == 0) {
        relevant_sum += r.nats;
      } else {
        irr += r.nats;
        ++irr_n;
      }
    }
    if (irr_n > 0) irrelevant_sum += irr / irr_n;
    mean_sum += rep.mean_nats;
    ++counted;
  }
  if (counted > 0) {
    row.mean_entropy = mean_sum / static_cast<double>(counted);
    row.relevant_entropy = relevant_sum / static_cast<double>(counted);
    row.irrelevant_mean_entropy = irrelevant_sum / static_cast<double>(counted);
  }
  return row;
}

// ---------------------------------------------------------------------------
// MDL
// ---------------------------------------------------------------------------

MdlSchedule MdlSchedule::standard() {
  return MdlSchedule{{0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.0625, 0.125, 0.25, 0.5, 1.0}};
}

void MdlSchedule::validate() const {
  if (fractions.empty()) throw std::invalid_argument("schedule must be nonempty");
  double prev = 0.0;
  for (double f : fractions) {
    if (!(f > prev && f <= 1.0)) {
      throw std::invalid_argument("schedule fractions must be strictly increasing in (0, 1]");
    }
    prev = f;
  }
  if (fractions.back() != 1.0) throw std::invalid_argument("schedule must end at 1.0");
}

MdlResult compute_mdl(const DatasetSpec& task, ModelConfig model, TrainConfig train,
                      const MdlSchedule& schedule, bool random_labels, int entropy_examples) {
  schedule.validate();
  task.validate();
  model.vocab = task.vocab;
  model.seq_len = task.seq_len;
  if (model.classes < task.num_classes()) {
    throw std::invalid_argument("model class count below the task's class count");
  }
  model.validate();

  Dataset data = generate(task);
  if (random_labels) randomize_labels(data, task.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  auto [train_set, val_set] = split_train_val(data, 0.9, task.seed);
  const std::size_t n = train_set.examples.size();

  std::vector<std::size_t> boundaries;
  for (double f : schedule.fractions) {
    auto t = static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
    t = std::clamp<std::size_t>(t, 1, n);
    if (boundaries.empty() || t > boundaries.back()) boundaries.push_back(t);
  }
  if (boundaries.back() != n) boundaries.push_back(n);

  MdlResult result;
  result.task = task;
  result.model = model;

  // First block: no model yet, uniform code over the classes.
  const double uniform_nats = std::log(static_cast<double>(model.classes));
  result.segments.push_back(
      MdlSegment{0, 0, boundaries[0], static_cast<double>(boundaries[0]) * uniform_nats});

  ParamStore final_params;
  for (std::size_t stage = 0; stage < boundaries.size(); ++stage) {
    const std::size_t prefix = boundaries[stage];
    ModelConfig stage_model = model;
    stage_model.seed = model.seed ^ (0x100000001b3ULL * (stage + 1));
    TrainConfig stage_train = train;
    stage_train.seed = train.seed ^ (0xc2b2ae3d27d4eb4fULL * (stage + 1));
    stage_train.accuracy_gate = 1.1;  // prequential stages always run all epochs

    Dataset prefix_set;
    prefix_set.spec = train_set.spec;
    prefix_set.examples.assign(train_set.examples.begin(),
                               train_set.examples.begin() + static_cast<long>(prefix));
    ParamStore params = ParamStore::init_transformer(stage_model);
    const TrainResult tr = train_transformer(stage_model, params, prefix_set, val_set, stage_train);
    if (tr.diverged) {
      result.diverged = true;
      return result;
    }
    if (stage + 1 < boundaries.size()) {
      const std::size_t begin = prefix;
      const std::size_t end = boundaries[stage + 1];
      const double nats = transformer_codelength(
          stage_model, params,
          std::span<const Example>(train_set.examples.data() + begin, end - begin));
      result.segments.push_back(MdlSegment{prefix, begin, end, nats});
    } else {
      result.final_val_accuracy = tr.final_val_accuracy;
      final_params = std::move(params);
    }
  }

  result.total_nats = 0.0;
  for (const auto& seg : result.segments) result.total_nats += seg.codelength_nats;
  result.kept = result.final_val_accuracy > 0.90;

  // Mean input entropy of the final model over validation examples.
  double entropy_sum = 0.0;
  std::size_t counted = 0;
  const std::size_t limit =
      std::min<std::size_t>(val_set.examples.size(), static_cast<std::size_t>(entropy_examples));
  for (std::size_t i = 0; i < limit; ++i) {
    const auto& ex = val_set.examples[i];
    const EntropyReport rep = entropy_of_inputs(result.model, final_params, ex.tokens, ex.label);
    if (rep.rows.size() != rep.undefined_rows) {
      entropy_sum += rep.mean_nats;
      ++counted;
    }
  }
  if (counted > 0) {
    result.mean_input_entropy = entropy_sum / static_cast<double>(counted);
    result.entropy_defined = true;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Report artifacts
// ---------------------------------------------------------------------------

std::string config_hash_hex(const std::string& canonical) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps line endings stable
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_branch_summary_csv(const std::filesystem::path& path, const BranchSummary& summary) {
  auto out = open_out(path);
  out << "token_type,branch,argmax_share,mean_abs_value,positions\n";
  for (int t = 0; t < kTokenTypeCount; ++t) {
    for (int b = 0; b < kBranchCount; ++b) {
      out << token_type_name(static_cast<TokenType>(t)) << ','
          << branch_name(static_cast<Branch>(b)) << ','
          << fmt(summary.argmax_share[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)])
          << ','
          << fmt(summary.mean_abs_value[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)])
          << ',' << summary.positions_seen[static_cast<std::size_t>(t)] << "\n";
    }
  }
}

void write_scatter_csv(const std::filesystem::path& path, std::span<const MdlResult> runs,
                       std::span<const std::uint64_t> seeds) {
  if (runs.size() != seeds.size()) throw std::invalid_argument("one seed per run required");
  auto out = open_out(path);
  out << "task,seed,classes,entropy_nats,mdl_nats,final_val_accuracy,kept\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    std::string task = std::string(task_name(r.task.kind));
    if (r.task.kind == TaskKind::BinCountOnes) {
      task += "-C" + std::to_string(r.task.classes);
    } else if (r.task.kind == TaskKind::ContainsTokenSet) {
      task += "-T" + std::to_string(r.task.token_set.size());
    }
    out << task << ',' << seeds[i] << ',' << r.task.num_classes() << ','
        << (r.entropy_defined ? fmt(r.mean_input_entropy) : std::string("")) << ','
        << fmt(r.total_nats) << ',' << fmt(r.final_val_accuracy) << ',' << (r.kept ? 1 : 0)
        << "\n";
  }
}

void write_length_sweep_csv(const std::filesystem::path& path,
                            std::span<const LengthSweepRow> rows) {
  auto out = open_out(path);
  out << "length,mean_entropy_nats,examples\n";
  for (const auto& r : rows) {
    out << r.length << ',' << fmt(r.mean_entropy) << ',' << r.examples << "\n";
  }
}

void write_hidden_sweep_csv(const std::filesystem::path& path,
                            std::span<const HiddenSweepRow> rows) {
  auto out = open_out(path);
  out << "hidden,val_accuracy,mean_entropy_nats,relevant_entropy_nats,irrelevant_mean_entropy_nats\n";
  for (const auto& r : rows) {
    out << r.hidden << ',' << fmt(r.val_accuracy) << ',' << fmt(r.mean_entropy) << ','
        << fmt(r.relevant_entropy) << ',' << fmt(r.irrelevant_mean_entropy) << "\n";
  }
}

}  // namespace semigrad
