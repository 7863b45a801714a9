// Command-line front end: dataset generation, training, gradient-graph
// analyses, description-length runs, the brute-force consistency check, and
// report aggregation. Subcommands exit 0 only when their internal gates
// pass.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "semigrad/analysis.hpp"
#include "semigrad/backprop.hpp"
#include "semigrad/nn.hpp"
#include "semigrad/oracle.hpp"
#include "semigrad/tasks.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace semigrad;

namespace {

struct RandomTapeConfig {
  int max_nodes = 14;
  double max_paths = 500.0;
};

double sample_edge_weight(std::mt19937_64& rng) {
  static const double pool[] = {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
  return pool[rng() % 7];
}

Tape random_weighted_tape(std::mt19937_64& rng, const RandomTapeConfig& cfg) {
  for (;;) {
    Tape tape;
    const int n_inputs = 1 + static_cast<int>(rng() % 3);
    const int n_total = n_inputs + 2 +
                        static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.max_nodes -
                                                                            n_inputs - 1));
    for (int i = 0; i < n_inputs; ++i) tape.add_input(0.0);
    for (int i = n_inputs; i < n_total; ++i) {
      const int arity = 1 + static_cast<int>(rng() % 2);
      NodeId parents[2];
      double partials[2];
      for (int s = 0; s < arity; ++s) {
        parents[s] = static_cast<NodeId>(rng() % static_cast<std::uint64_t>(i));
        partials[s] = sample_edge_weight(rng);
      }
      tape.add_raw(std::span<const NodeId>(parents, static_cast<std::size_t>(arity)),
                   std::span<const double>(partials, static_cast<std::size_t>(arity)));
    }
    tape.set_output(static_cast<NodeId>(n_total - 1));
    tape.seal_raw();
    std::vector<double> count(tape.size(), 0.0);
    count[static_cast<std::size_t>(tape.output())] = 1.0;
    bool ok = true;
    for (NodeId i = static_cast<NodeId>(tape.size()) - 1; i >= 0 && ok; --i) {
      for (int s = 0; s < tape.arity(i); ++s) {
        auto& c = count[static_cast<std::size_t>(tape.parent(i, s))];
        c += count[static_cast<std::size_t>(i)];
        if (c > cfg.max_paths) ok = false;
      }
    }
    if (ok) return tape;
  }
}

DatasetSpec spec_from_flags(const std::string& task, int seq_len, int vocab, int count,
                            std::uint64_t seed, int classes,
                            const std::vector<int>& token_set) {
  DatasetSpec spec;
  spec.kind = task_from_name(task);
  spec.seq_len = seq_len;
  spec.vocab = vocab;
  spec.count = count;
  spec.seed = seed;
  spec.classes = spec.kind == TaskKind::BinCountOnes ? classes : 2;
  spec.token_set = token_set;
  spec.validate();
  return spec;
}

json model_config_to_json(const ModelConfig& c) {
  return json{{"layers", c.layers},     {"hidden", c.hidden},   {"heads", c.heads},
              {"vocab", c.vocab},       {"seq_len", c.seq_len}, {"classes", c.classes},
              {"ffn_mult", c.ffn_mult}, {"readout", std::string(readout_name(c.readout))},
              {"embed_init_std", c.embed_init_std},
              {"attn_qk_init_gain", c.attn_qk_init_gain},
              {"seed", c.seed}};
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"accuracy_gate", c.accuracy_gate},
              {"seed", c.seed}};
}

json dataset_spec_to_json(const DatasetSpec& s) {
  json j{{"task", std::string(task_name(s.kind))}, {"seq_len", s.seq_len}, {"vocab", s.vocab},
         {"count", s.count},                       {"seed", s.seed},       {"classes", s.classes}};
  if (!s.token_set.empty()) j["token_set"] = s.token_set;
  return j;
}

Dataset load_dataset_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return load_jsonl(in);
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

int run_gen_data(const DatasetSpec& spec, const fs::path& out) {
  const Dataset data = generate(spec);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  save_jsonl(data, os);
  std::printf("wrote %zu examples to %s\n", data.examples.size(), out.string().c_str());
  return 0;
}

int run_train(const fs::path& data_path, ModelConfig cfg, TrainConfig tc, double split_fraction,
              std::uint64_t split_seed, const fs::path& out_dir) {
  const Dataset data = load_dataset_file(data_path);
  cfg.vocab = data.spec.vocab;
  cfg.seq_len = data.spec.seq_len;
  if (cfg.classes < data.spec.num_classes()) cfg.classes = data.spec.num_classes();
  cfg.validate();
  const auto [train, val] = split_train_val(data, split_fraction, split_seed);

  ParamStore params = ParamStore::init_transformer(cfg);
  const TrainResult result = train_transformer(cfg, params, train, val, tc);

  fs::create_directories(out_dir);
  save_transformer_snapshot(out_dir / "model", cfg, params);
  json epochs = json::array();
  for (const auto& e : result.epochs) {
    epochs.push_back(json{{"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
  }
  const json config{{"model", model_config_to_json(cfg)},
                    {"train", train_config_to_json(tc)},
                    {"dataset", dataset_spec_to_json(data.spec)}};
  write_json_file(out_dir / "metrics.json",
                  json{{"config", config},
                       {"config_hash", config_hash_hex(config.dump())},
                       {"epochs", epochs},
                       {"final_val_accuracy", result.final_val_accuracy},
                       {"reached_gate", result.reached_gate},
                       {"diverged", result.diverged}});
  std::printf("trained %zu epochs, final validation accuracy %.4f%s\n", result.epochs.size(),
              result.final_val_accuracy, result.diverged ? " (diverged)" : "");
  return result.diverged ? 1 : 0;
}

int run_analyze_branches(const fs::path& snapshot, const fs::path& data_path, int limit,
                         const fs::path& out, const fs::path& summary_csv) {
  const Snapshot snap = load_snapshot(snapshot);
  if (snap.model != "transformer") throw std::runtime_error("branch analysis needs a transformer");
  const Dataset data = load_dataset_file(data_path);

  std::vector<Example> used(data.examples.begin(),
                            data.examples.begin() +
                                std::min<std::size_t>(data.examples.size(),
                                                      static_cast<std::size_t>(limit)));
  json rows = json::array();
  bool gates_ok = true;
  for (const auto& ex : used) {
    const BranchReport report =
        branch_attribution(snap.transformer_config, snap.params, ex.tokens, ex.label);
    json jrows = json::array();
    for (const auto& row : report.rows) {
      double share = 0.0;
      for (double s : row.normalized_abs) share += s;
      if (share > 0.0 && std::fabs(share - 1.0) > 1e-9) gates_ok = false;
      jrows.push_back(json{{"layer", row.layer},
                           {"position", row.position},
                           {"token_type",
                            std::string(token_type_name(classify_position(ex.tokens, row.position)))},
                           {"values", row.value},
                           {"argmax_branch", row.argmax_branch >= 0
                                                 ? std::string(branch_name(
                                                       static_cast<Branch>(row.argmax_branch)))
                                                 : "none"},
                           {"normalized_abs", row.normalized_abs}});
    }
    rows.push_back(json{{"tokens", ex.tokens},
                        {"label", ex.label},
                        {"predicted", report.predicted},
                        {"correct", report.correct},
                        {"rows", jrows}});
  }
  write_json_file(out, json{{"format", "semigrad-branches"},
                            {"version", 1},
                            {"model_config", model_config_to_json(snap.transformer_config)},
                            {"examples", rows}});
  if (!summary_csv.empty()) {
    const BranchSummary summary =
        summarize_final_layer(snap.transformer_config, snap.params, used);
    write_branch_summary_csv(summary_csv, summary);
  }
  std::printf("analyzed %zu examples -> %s%s\n", used.size(), out.string().c_str(),
              gates_ok ? "" : " (GATE FAILURE: branch shares)");
  return gates_ok ? 0 : 1;
}

int run_analyze_entropy(const fs::path& snapshot, const fs::path& data_path, int limit,
                        const std::vector<int>& lengths, int per_length, std::uint64_t sweep_seed,
                        const fs::path& out) {
  const Snapshot snap = load_snapshot(snapshot);
  bool gates_ok = true;
  if (!lengths.empty()) {
    if (snap.model != "transformer") throw std::runtime_error("length sweep needs a transformer");
    const auto rows = entropy_length_sweep(snap.transformer_config, snap.params, lengths,
                                           per_length, sweep_seed);
    write_length_sweep_csv(out, rows);
    for (const auto& r : rows) gates_ok = gates_ok && r.mean_entropy >= -1e-9;
    std::printf("length sweep -> %s\n", out.string().c_str());
    return gates_ok ? 0 : 1;
  }

  const Dataset data = load_dataset_file(data_path);
  json rows = json::array();
  const std::size_t n =
      std::min<std::size_t>(data.examples.size(), static_cast<std::size_t>(limit));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = data.examples[i];
    EntropyReport report;
    if (snap.model == "transformer") {
      report = entropy_of_inputs(snap.transformer_config, snap.params, ex.tokens, ex.label);
    } else {
      throw std::runtime_error("entropy analysis over datasets needs a transformer snapshot");
    }
    json token_rows = json::array();
    for (const auto& row : report.rows) {
      if (row.defined && row.nats < -1e-9) gates_ok = false;
      token_rows.push_back(
          json{{"position", row.index}, {"nats", row.nats}, {"defined", row.defined}});
    }
    rows.push_back(json{{"tokens", ex.tokens},
                        {"label", ex.label},
                        {"predicted", report.predicted},
                        {"correct", report.correct},
                        {"mean_nats", report.mean_nats},
                        {"undefined_rows", report.undefined_rows},
                        {"positions", token_rows}});
  }
  write_json_file(out, json{{"format", "semigrad-entropy"},
                            {"version", 1},
                            {"model", snap.model},
                            {"examples", rows}});
  std::printf("entropy for %zu examples -> %s%s\n", n, out.string().c_str(),
              gates_ok ? "" : " (GATE FAILURE: negative entropy)");
  return gates_ok ? 0 : 1;
}

int run_mdl(const DatasetSpec& spec, ModelConfig cfg, TrainConfig tc, bool random_labels,
            const fs::path& out) {
  const MdlSchedule schedule = MdlSchedule::standard();
  const MdlResult result = compute_mdl(spec, cfg, tc, schedule, random_labels);
  double total = 0.0;
  json segments = json::array();
  for (const auto& seg : result.segments) {
    total += seg.codelength_nats;
    segments.push_back(json{{"train_prefix", seg.train_prefix},
                            {"begin", seg.begin},
                            {"end", seg.end},
                            {"codelength_nats", seg.codelength_nats}});
  }
  const bool additive = total == result.total_nats;
  const json config{{"task", dataset_spec_to_json(spec)},
                    {"model", model_config_to_json(result.model)},
                    {"train", train_config_to_json(tc)},
                    {"random_labels", random_labels}};
  write_json_file(out, json{{"format", "semigrad-mdl"},
                            {"version", 1},
                            {"config", config},
                            {"config_hash", config_hash_hex(config.dump())},
                            {"segments", segments},
                            {"total_nats", result.total_nats},
                            {"final_val_accuracy", result.final_val_accuracy},
                            {"kept", result.kept},
                            {"diverged", result.diverged},
                            {"mean_input_entropy", result.mean_input_entropy},
                            {"entropy_defined", result.entropy_defined}});
  std::printf("mdl %.2f nats (final accuracy %.3f, %s) -> %s\n", result.total_nats,
              result.final_val_accuracy, result.kept ? "kept" : "dropped",
              out.string().c_str());
  return additive && !result.diverged ? 0 : 1;
}

int run_oracle_check(int tapes, std::uint64_t seed, const RandomTapeConfig& tape_cfg) {
  std::mt19937_64 rng(seed);
  std::size_t failures = 0;
  for (int trial = 0; trial < tapes; ++trial) {
    Tape t = random_weighted_tape(rng, tape_cfg);
    const auto sum_store = backprop<SumProduct>(t);
    const auto max_store = backprop<MaxProduct>(t);
    const auto ent_store = backprop<Entropy>(t);
    for (NodeId v = 0; v < static_cast<NodeId>(t.size()); ++v) {
      const PathSet paths = enumerate_paths(t, v);
      const double want_sum = oracle_sum(paths);
      if (std::fabs(sum_store[static_cast<std::size_t>(v)] - want_sum) >
          1e-9 * std::max(1.0, std::fabs(want_sum))) {
        ++failures;
      }
      const auto want_max = oracle_max(paths);
      const auto& got_max = max_store[static_cast<std::size_t>(v)];
      if (want_max.has_path != !got_max.empty) {
        ++failures;
      } else if (want_max.has_path) {
        if (std::fabs(got_max.hi - want_max.value) >
            1e-9 * std::max(1.0, std::fabs(want_max.value))) {
          ++failures;
        }
        const auto witness = witness_path(max_store, v);
        if (std::fabs(replay_witness(t, witness) - got_max.hi) >
            1e-9 * std::max(1.0, std::fabs(got_max.hi))) {
          ++failures;
        }
      }
      const auto want_h = oracle_entropy(paths);
      const auto got_h = Entropy::finalize(ent_store[static_cast<std::size_t>(v)]);
      if (want_h.defined != got_h.defined ||
          (want_h.defined && std::fabs(got_h.nats - want_h.nats) > 1e-6)) {
        ++failures;
      }
    }
  }
  std::printf("oracle-check: %d tapes, %zu mismatches\n", tapes, failures);
  return failures == 0 ? 0 : 1;
}

int run_report(const fs::path& in_dir, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> mdl_files;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("mdl-", 0) == 0 && entry.path().extension() == ".json") {
      mdl_files.push_back(entry.path());
    }
  }
  std::sort(mdl_files.begin(), mdl_files.end());

  std::ofstream scatter(out_dir / "fig_entropy_vs_mdl.csv", std::ios::binary);
  scatter << "task,seed,classes,entropy_nats,mdl_nats,final_val_accuracy,kept,source\n";
  json manifest = json::array();
  bool ok = true;
  for (const auto& path : mdl_files) {
    std::ifstream in(path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      std::fprintf(stderr, "skipping malformed %s: %s\n", path.string().c_str(), e.what());
      ok = false;
      continue;
    }
    if (j.value("format", "") != "semigrad-mdl") continue;
    const auto& cfg = j.at("config");
    const auto& task = cfg.at("task");
    std::string task_id = task.at("task").get<std::string>();
    if (task_id == "BinCountOnes") task_id += "-C" + std::to_string(task.at("classes").get<int>());
    if (task.contains("token_set")) {
      task_id += "-T" + std::to_string(task.at("token_set").size());
    }
    char entropy_buf[32] = "";
    if (j.value("entropy_defined", false)) {
      std::snprintf(entropy_buf, sizeof(entropy_buf), "%.12g",
                    j.at("mean_input_entropy").get<double>());
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%llu,%d,%s,%.12g,%.12g,%d,%s", task_id.c_str(),
                  static_cast<unsigned long long>(task.at("seed").get<std::uint64_t>()),
                  task.at("classes").get<int>(), entropy_buf, j.at("total_nats").get<double>(),
                  j.at("final_val_accuracy").get<double>(), j.value("kept", false) ? 1 : 0,
                  path.filename().string().c_str());
    scatter << buf << "\n";
    manifest.push_back(json{{"file", path.filename().string()},
                            {"config_hash", j.value("config_hash", "")},
                            {"kept", j.value("kept", false)}});
  }
  write_json_file(out_dir / "report_manifest.json",
                  json{{"format", "semigrad-report"},
                       {"version", 1},
                       {"mdl_runs", manifest},
                       {"mdl_run_count", manifest.size()}});
  std::printf("report: %zu description-length runs -> %s\n", manifest.size(),
              out_dir.string().c_str());
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiring-generalized gradient-graph analysis toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic labeled dataset");
  std::string g_task = "Contains1";
  int g_seq = 10, g_vocab = 20, g_count = 10000, g_classes = 2;
  std::uint64_t g_seed = 1;
  std::vector<int> g_token_set;
  std::string g_out = "data.jsonl";
  gen->add_option("--task", g_task, "Task name (e.g. Contains1, FirstTokenRepeatedOnce)");
  gen->add_option("--seq-len", g_seq, "Sequence length");
  gen->add_option("--vocab", g_vocab, "Vocabulary size");
  gen->add_option("--count", g_count, "Number of examples");
  gen->add_option("--seed", g_seed, "Generation seed");
  gen->add_option("--classes", g_classes, "Class count (BinCountOnes)");
  gen->add_option("--token-set", g_token_set, "Required tokens (ContainsTokenSet)")->delimiter(',');
  gen->add_option("-o,--out", g_out, "Output JSONL path");

  // shared model/train flags
  ModelConfig mcfg;
  TrainConfig tcfg;
  std::string readout_flag = "mean";
  auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--readout", readout_flag, "Classifier readout: mean or first");
    cmd->add_option("--embed-init-std", mcfg.embed_init_std, "Embedding init stddev");
    cmd->add_option("--qk-init-gain", mcfg.attn_qk_init_gain, "Query/key init gain over Xavier");
    cmd->add_option("--layers", mcfg.layers, "Encoder layers");
    cmd->add_option("--hidden", mcfg.hidden, "Hidden size");
    cmd->add_option("--heads", mcfg.heads, "Attention heads");
    cmd->add_option("--classes-out", mcfg.classes, "Output classes");
    cmd->add_option("--ffn-mult", mcfg.ffn_mult, "Feed-forward expansion");
    cmd->add_option("--model-seed", mcfg.seed, "Parameter init seed");
  };
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--epochs", tcfg.epochs, "Training epochs");
    cmd->add_option("--batch", tcfg.batch_size, "Batch size");
    cmd->add_option("--lr", tcfg.learning_rate, "Learning rate");
    cmd->add_option("--gate", tcfg.accuracy_gate, "Early-stop validation accuracy");
    cmd->add_option("--train-seed", tcfg.seed, "Shuffling seed");
  };

  // train
  auto* train = app.add_subcommand("train", "Train the encoder on a dataset");
  std::string t_data = "data.jsonl", t_out = "run";
  double t_split = 0.9;
  std::uint64_t t_split_seed = 1;
  train->add_option("--data", t_data, "Dataset JSONL")->required();
  add_model_flags(train);
  add_train_flags(train);
  train->add_option("--split", t_split, "Training fraction");
  train->add_option("--split-seed", t_split_seed, "Split seed");
  train->add_option("-o,--out-dir", t_out, "Output directory (snapshot + metrics)");

  // analyze-branches
  auto* branches = app.add_subcommand("analyze-branches",
                                      "Max-product attribution at the attention branch point");
  std::string b_snapshot = "run/model", b_data = "data.jsonl", b_out = "branches.json",
              b_csv;
  int b_limit = 200;
  branches->add_option("--snapshot", b_snapshot, "Snapshot prefix")->required();
  branches->add_option("--data", b_data, "Dataset JSONL")->required();
  branches->add_option("--limit", b_limit, "Examples to analyze");
  branches->add_option("-o,--out", b_out, "Output JSON");
  branches->add_option("--summary-csv", b_csv, "Final-layer summary CSV");

  // analyze-entropy
  auto* entropy = app.add_subcommand("analyze-entropy",
                                     "Path entropy of the aggregated input representations");
  std::string e_snapshot = "run/model", e_data, e_out = "entropy.json";
  int e_limit = 200, e_per_length = 30;
  std::vector<int> e_lengths;
  std::uint64_t e_seed = 1;
  entropy->add_option("--snapshot", e_snapshot, "Snapshot prefix")->required();
  entropy->add_option("--data", e_data, "Dataset JSONL (per-example mode)");
  entropy->add_option("--limit", e_limit, "Examples to analyze");
  entropy->add_option("--lengths", e_lengths, "Sweep mode: input lengths")->delimiter(',');
  entropy->add_option("--per-length", e_per_length, "Sweep mode: examples per length");
  entropy->add_option("--sweep-seed", e_seed, "Sweep mode: sampling seed");
  entropy->add_option("-o,--out", e_out, "Output JSON (or CSV in sweep mode)");

  // mdl
  auto* mdl = app.add_subcommand("mdl", "Prequential description length of a task");
  std::string m_task = "Contains1", m_out = "mdl.json";
  int m_seq = 10, m_vocab = 20, m_count = 2000, m_classes = 2;
  std::uint64_t m_seed = 1;
  std::vector<int> m_token_set;
  bool m_random_labels = false;
  mdl->add_option("--task", m_task, "Task name");
  mdl->add_option("--seq-len", m_seq, "Sequence length");
  mdl->add_option("--vocab", m_vocab, "Vocabulary size");
  mdl->add_option("--count", m_count, "Dataset size");
  mdl->add_option("--seed", m_seed, "Dataset/run seed");
  mdl->add_option("--classes", m_classes, "Task classes (BinCountOnes)");
  mdl->add_option("--token-set", m_token_set, "Required tokens (ContainsTokenSet)")->delimiter(',');
  mdl->add_flag("--random-labels", m_random_labels, "Replace labels with coin flips");
  add_model_flags(mdl);
  add_train_flags(mdl);
  mdl->add_option("-o,--out", m_out, "Output JSON");

  // oracle-check
  auto* oracle = app.add_subcommand("oracle-check",
                                    "Compare the backward pass against brute-force enumeration");
  int o_tapes = 1000;
  std::uint64_t o_seed = 1;
  RandomTapeConfig o_cfg;
  oracle->add_option("--tapes", o_tapes, "Number of random gradient graphs");
  oracle->add_option("--seed", o_seed, "Generator seed");
  oracle->add_option("--max-nodes", o_cfg.max_nodes, "Nodes per graph");
  oracle->add_option("--max-paths", o_cfg.max_paths, "Path-count bound");

  // report
  auto* report = app.add_subcommand("report", "Aggregate run artifacts into plot-ready series");
  std::string r_in = "results", r_out = "report";
  report->add_option("--in", r_in, "Directory of run JSON files")->required();
  report->add_option("-o,--out", r_out, "Report output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return run_gen_data(spec_from_flags(g_task, g_seq, g_vocab, g_count, g_seed, g_classes,
                                          g_token_set),
                          g_out);
    }
    mcfg.readout = readout_from_name(readout_flag);
    if (train->parsed()) return run_train(t_data, mcfg, tcfg, t_split, t_split_seed, t_out);
    if (branches->parsed()) return run_analyze_branches(b_snapshot, b_data, b_limit, b_out, b_csv);
    if (entropy->parsed()) {
      return run_analyze_entropy(e_snapshot, e_data, e_limit, e_lengths, e_per_length, e_seed,
                                 e_out);
    }
    if (mdl->parsed()) {
      const DatasetSpec spec =
          spec_from_flags(m_task, m_seq, m_vocab, m_count, m_seed, m_classes, m_token_set);
      return run_mdl(spec, mcfg, tcfg, m_random_labels, m_out);
    }
    if (oracle->parsed()) return run_oracle_check(o_tapes, o_seed, o_cfg);
    if (report->parsed()) return run_report(r_in, r_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
