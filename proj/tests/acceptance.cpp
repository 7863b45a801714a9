// Acceptance suite: one test case per gate, each printing a summary line.
// Run via ctest (individual cases) or directly for the full battery.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "semigrad/analysis.hpp"
#include "semigrad/backprop.hpp"
#include "semigrad/nn.hpp"
#include "semigrad/oracle.hpp"
#include "support/axiom_suite.hpp"
#include "support/test_graphs.hpp"

using namespace semigrad;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(const char* name, bool pass, const std::string& details) {
  std::printf("[acceptance] %s: %s (%s)\n", name, pass ? "PASS" : "FAIL", details.c_str());
  std::fflush(stdout);
}

bool close_rel(double got, double want, double tol) {
  return std::fabs(got - want) <= tol * std::max(1.0, std::fabs(want));
}

}  // namespace

TEST_CASE("oracle equivalence on random gradient graphs") {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240);
  std::size_t mismatches = 0;
  std::size_t nodes_checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Tape t = testing::random_weighted_tape(rng);
    const auto sum_store = backprop<SumProduct>(t);
    const auto max_store = backprop<MaxProduct>(t);
    const auto ent_store = backprop<Entropy>(t);
    for (NodeId v = 0; v < static_cast<NodeId>(t.size()); ++v) {
      ++nodes_checked;
      const PathSet paths = enumerate_paths(t, v);
      if (!close_rel(sum_store[static_cast<std::size_t>(v)], oracle_sum(paths), 1e-9)) {
        ++mismatches;
      }
      const auto want_max = oracle_max(paths);
      const auto& got_max = max_store[static_cast<std::size_t>(v)];
      if (want_max.has_path != !got_max.empty) {
        ++mismatches;
      } else if (want_max.has_path) {
        if (!close_rel(got_max.hi, want_max.value, 1e-9) ||
            !close_rel(got_max.lo, want_max.min_value, 1e-9)) {
          ++mismatches;
        }
        const auto witness = witness_path(max_store, v);
        if (!close_rel(replay_witness(t, witness), got_max.hi, 1e-9)) ++mismatches;
      }
      const auto want_h = oracle_entropy(paths);
      const auto got_h = Entropy::finalize(ent_store[static_cast<std::size_t>(v)]);
      if (want_h.defined != got_h.defined ||
          (want_h.defined && std::fabs(got_h.nats - want_h.nats) > 1e-6)) {
        ++mismatches;
      }
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = mismatches == 0 && elapsed < 60.0;
  report("oracle equivalence", pass,
         "1000 tapes, " + std::to_string(nodes_checked) + " node checks, " +
             std::to_string(mismatches) + " mismatches, " + std::to_string(elapsed) + "s");
  CHECK(mismatches == 0);
  CHECK(elapsed < 60.0);
}

TEST_CASE("gradient fidelity against finite differences") {
  const auto start = Clock::now();
  std::size_t failures = 0;
  std::size_t checks = 0;

  std::mt19937_64 rng(555);
  for (int trial = 0; trial < 200; ++trial) {
    Tape t = testing::random_primitive_composition(rng);
    const auto grad = backprop<SumProduct>(t);
    const auto fd = finite_difference_grad(t, 1e-5);
    for (std::size_t i = 0; i < t.input_count(); ++i) {
      ++checks;
      if (!fd.finite[i] ||
          !close_rel(grad[static_cast<std::size_t>(t.input_ids()[i])], fd.gradient[i], 1e-5)) {
        ++failures;
      }
    }
  }

  // Full desk transformer: token-embedding gradients of the training loss.
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.vocab = 20;
  cfg.seq_len = 10;
  cfg.classes = 2;
  cfg.seed = 9;
  ParamStore params = ParamStore::init_transformer(cfg);
  Tape tape;
  const std::vector<int> tokens{1, 4, 6, 1, 2, 3, 5, 7, 8, 9};
  const ModelGraph g = build_transformer(tape, cfg, params, tokens);
  tape.set_output(append_cross_entropy(tape, g.logits, 1));
  tape.forward();
  const auto grad = backprop<SumProduct>(tape);
  const auto fd = finite_difference_grad(tape, 1e-5);
  const auto& emb = params.entry("tok_embed");
  for (std::size_t i = emb.offset; i < emb.offset + emb.size; ++i) {
    ++checks;
    const double got = grad[static_cast<std::size_t>(g.param_nodes[i])];
    if (!fd.finite[i] || !close_rel(got, fd.gradient[i], 1e-5)) ++failures;
  }

  const double elapsed = seconds_since(start);
  const bool pass = failures == 0 && elapsed < 300.0;
  report("gradient fidelity", pass,
         std::to_string(checks) + " derivative checks, " + std::to_string(failures) +
             " failures, " + std::to_string(elapsed) + "s");
  CHECK(failures == 0);
  CHECK(elapsed < 300.0);
}

TEST_CASE("worked example statistics") {
  auto g = testing::make_worked_example(1.0, 2.0);
  const double e = std::exp(1.0);

  const auto grad = backprop<SumProduct>(g.tape);
  const double dfdx = grad[static_cast<std::size_t>(g.x0)];
  const double dfdy = grad[static_cast<std::size_t>(g.x1)];

  const auto max_store = backprop<MaxProduct>(g.tape);
  const double top = max_store[static_cast<std::size_t>(g.x0)].hi;
  const auto witness = witness_path(max_store, g.x0);
  const bool witness_ok = witness.size() == 2 && witness[0].to == g.x2 &&
                          close_rel(replay_witness(g.tape, witness), top, 1e-9);

  // Frozen from the brute-force oracle over the two source paths {e, 2};
  // cross-checked against the live oracle here.
  const double kEntropyX0 = 0.6815144429546898;
  const auto ent = Entropy::finalize(backprop<Entropy>(g.tape)[static_cast<std::size_t>(g.x0)]);
  const auto oracle_h = oracle_entropy(enumerate_paths(g.tape, g.x0));

  const bool pass = std::fabs(dfdx - (e + 2.0)) <= 1e-6 && std::fabs(dfdy - (-3.0)) <= 1e-6 &&
                    std::fabs(top - e) <= 1e-6 && witness_ok && ent.defined &&
                    std::fabs(ent.nats - kEntropyX0) <= 1e-6 &&
                    std::fabs(oracle_h.nats - kEntropyX0) <= 1e-9;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "df/dx=%.6f df/dy=%.6f top=%.6f witness-via-exp=%d entropy=%.6f", dfdx, dfdy,
                top, witness_ok ? 1 : 0, ent.nats);
  report("worked example", pass, buf);
  CHECK(pass);
}

TEST_CASE("first-token-repeat replication") {
  const auto start = Clock::now();
  // Training setup for the 1-layer, hidden-16, 2-head model. The learning
  // rate is raised from the 1e-3 default: at 1e-3 the model stalls around
  // 84% validation accuracy inside 50 epochs, at 3e-3 it converges.
  const double kLr = 3e-3;
  const int kEpochs = 50;

  int seeds_reaching_gate = 0;
  std::array<std::array<std::size_t, kBranchCount>, kTokenTypeCount> argmax_counts{};
  std::array<std::array<double, kBranchCount>, kTokenTypeCount> abs_sums{};
  std::array<std::size_t, kTokenTypeCount> totals{};
  std::size_t joint_hits = 0;
  std::size_t joint_examples = 0;

  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    DatasetSpec spec;
    spec.kind = TaskKind::FirstTokenRepeatedOnce;
    spec.seq_len = 10;
    spec.vocab = 20;
    spec.count = 10000;
    spec.seed = seed;
    Dataset data = generate(spec);
    auto [train, val] = split_train_val(data, 0.9, seed);

    ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.vocab = 20;
    cfg.seq_len = 10;
    cfg.classes = 2;
    cfg.seed = seed;
    ParamStore params = ParamStore::init_transformer(cfg);
    TrainConfig tc;
    tc.epochs = kEpochs;
    tc.batch_size = 64;
    tc.learning_rate = kLr;
    tc.accuracy_gate = 2.0;  // run all epochs; the gate below is observational
    tc.seed = seed;

    bool reached = false;
    tc.epochs = 1;
    for (int e = 0; e < kEpochs; ++e) {
      const TrainResult r = train_transformer(cfg, params, train, val, tc);
      if (r.epochs[0].val_accuracy >= 1.0) reached = true;
    }
    if (!reached) continue;
    ++seeds_reaching_gate;

    // Branch attribution over correctly classified positives.
    for (const auto& ex : val.examples) {
      if (ex.label != 1) continue;
      const BranchReport rep = branch_attribution(cfg, params, ex.tokens, ex.label);
      if (!rep.correct) continue;
      int first_branch = -1, repeat_branch = -1;
      for (const auto& row : rep.rows) {
        if (row.layer != cfg.layers - 1) continue;
        const auto type = classify_position(ex.tokens, row.position);
        const auto ti = static_cast<std::size_t>(type);
        ++totals[ti];
        if (row.argmax_branch >= 0) {
          ++argmax_counts[ti][static_cast<std::size_t>(row.argmax_branch)];
        }
        for (int b = 0; b < kBranchCount; ++b) {
          abs_sums[ti][static_cast<std::size_t>(b)] +=
              std::fabs(row.value[static_cast<std::size_t>(b)]);
        }
        if (type == TokenType::First) first_branch = row.argmax_branch;
        if (type == TokenType::Repeat) repeat_branch = row.argmax_branch;
      }
      ++joint_examples;
      if (first_branch == static_cast<int>(Branch::Queries) &&
          repeat_branch == static_cast<int>(Branch::Keys)) {
        ++joint_hits;
      }
    }
  }

  const double joint_rate =
      joint_examples > 0 ? static_cast<double>(joint_hits) / static_cast<double>(joint_examples)
                         : 0.0;
  // Mean |max-product| per (token type, branch); the repeat/keys cell must
  // top the table.
  double best_value = -1.0;
  int best_type = -1, best_branch = -1;
  for (int t = 0; t < kTokenTypeCount; ++t) {
    if (totals[static_cast<std::size_t>(t)] == 0) continue;
    for (int b = 0; b < kBranchCount; ++b) {
      const double mean = abs_sums[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] /
                          static_cast<double>(totals[static_cast<std::size_t>(t)]);
      if (mean > best_value) {
        best_value = mean;
        best_type = t;
        best_branch = b;
      }
    }
  }
  const bool keys_strongest = best_type == static_cast<int>(TokenType::Repeat) &&
                              best_branch == static_cast<int>(Branch::Keys);

  const double elapsed = seconds_since(start);
  const bool pass =
      seeds_reaching_gate >= 2 && joint_rate >= 0.70 && keys_strongest && elapsed < 1200.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "seeds@100%%=%d/3 queries@first&keys@repeat=%.3f strongest=(%s,%s) %.0fs",
                seeds_reaching_gate, joint_rate,
                best_type >= 0 ? std::string(token_type_name(static_cast<TokenType>(best_type))).c_str()
                               : "none",
                best_branch >= 0 ? std::string(branch_name(static_cast<Branch>(best_branch))).c_str()
                                 : "none",
                elapsed);
  report("first-token-repeat replication", pass, buf);
  CHECK(seeds_reaching_gate >= 2);
  CHECK(joint_rate >= 0.70);
  CHECK(keys_strongest);
  CHECK(elapsed < 1200.0);
}

TEST_CASE("entropy sanity checks") {
  const auto start = Clock::now();

  // (a) entropy grows with input length for a fixed trained model.
  DatasetSpec spec;
  spec.kind = TaskKind::Contains1;
  spec.seq_len = 32;
  spec.vocab = 10;
  spec.count = 2000;
  spec.seed = 7;
  Dataset data = generate(spec);
  auto [train, val] = split_train_val(data, 0.9, 7);
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.vocab = 10;
  cfg.seq_len = 32;
  cfg.classes = 2;
  cfg.seed = 7;
  ParamStore params = ParamStore::init_transformer(cfg);
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 64;
  tc.learning_rate = 3e-3;
  tc.accuracy_gate = 0.97;
  tc.seed = 7;
  const TrainResult tr = train_transformer(cfg, params, train, val, tc);

  const std::vector<int> lengths{4, 8, 16, 32};
  const auto sweep = entropy_length_sweep(cfg, params, lengths, 40, 99);
  bool strictly_increasing = sweep.size() == lengths.size();
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    strictly_increasing = strictly_increasing && sweep[i].mean_entropy > sweep[i - 1].mean_entropy;
  }

  // (b) MLP entropy grows with hidden size; the relevant feature tops the
  // irrelevant mean at the largest size.
  TrainConfig mtc;
  mtc.epochs = 100;  // past-convergence training; the feature-level gaps
                     // only settle once the fit is tight
  mtc.batch_size = 32;
  mtc.learning_rate = 5e-3;
  mtc.accuracy_gate = 2.0;
  mtc.seed = 11;
  std::vector<HiddenSweepRow> hidden_rows;
  for (int hidden : {4, 16, 64}) {
    hidden_rows.push_back(mlp_entropy_for_hidden(hidden, 2, 2000, 300, mtc, 11));
  }
  bool hidden_increasing = true;
  for (std::size_t i = 1; i < hidden_rows.size(); ++i) {
    hidden_increasing =
        hidden_increasing && hidden_rows[i].mean_entropy > hidden_rows[i - 1].mean_entropy;
  }
  const auto& largest = hidden_rows.back();
  const bool relevant_tops = largest.relevant_entropy > largest.irrelevant_mean_entropy;

  const double elapsed = seconds_since(start);
  const bool pass = strictly_increasing && hidden_increasing && relevant_tops && elapsed < 600.0;
  std::stringstream details;
  details << "lengths:";
  for (const auto& row : sweep) details << " " << row.mean_entropy;
  details << " | hidden:";
  for (const auto& row : hidden_rows) {
    details << " " << row.mean_entropy << "(acc " << row.val_accuracy << ")";
  }
  details << " | relevant " << largest.relevant_entropy << " vs irrelevant "
          << largest.irrelevant_mean_entropy << " | train acc " << tr.final_val_accuracy << " | "
          << elapsed << "s";
  report("entropy sanity", pass, details.str());
  CHECK(strictly_increasing);
  CHECK(hidden_increasing);
  CHECK(relevant_tops);
  CHECK(elapsed < 600.0);
}

TEST_CASE("algebra and degenerate cases") {
  std::mt19937_64 rng(314159);
  const auto fails = testing::run_axiom_suite(rng, 10000, 1e-12);

  // Single path: exactly zero in the log domain, 1e-12 in the linear one.
  bool degenerate_ok = true;
  {
    LogWeightedMass acc = LogEntropy::one();
    for (int i = 0; i < 7; ++i) acc = LogEntropy::times(acc, LogEntropy::lift(0.37 * (i + 1)));
    degenerate_ok = degenerate_ok && LogEntropy::finalize(acc).nats == 0.0;
    const auto lin = Entropy::finalize(Entropy::lift(0.42));
    degenerate_ok = degenerate_ok && std::fabs(lin.nats) <= 1e-12;
  }
  // k uniform paths: log k within 1e-9.
  for (int k = 2; k <= 64; k *= 2) {
    WeightedLogMass acc = Entropy::zero();
    for (int i = 0; i < k; ++i) acc = Entropy::plus(acc, Entropy::lift(1.0));
    degenerate_ok = degenerate_ok &&
                    std::fabs(Entropy::finalize(acc).nats - std::log(static_cast<double>(k))) <=
                        1e-9;
  }
  // Log-domain equals linear-domain entropy on random graphs.
  std::size_t log_mismatch = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Tape t = testing::random_weighted_tape(rng);
    const auto lin = backprop<Entropy>(t);
    const auto lg = backprop<LogEntropy>(t);
    for (std::size_t v = 0; v < t.size(); ++v) {
      const auto a = Entropy::finalize(lin[v]);
      const auto b = LogEntropy::finalize(lg[v]);
      if (a.defined != b.defined ||
          (a.defined && std::fabs(a.nats - b.nats) > 1e-9 * std::max(1.0, std::fabs(a.nats)))) {
        ++log_mismatch;
      }
    }
  }

  const bool pass = fails.total() == 0 && degenerate_ok && log_mismatch == 0;
  report("algebra and degenerate cases", pass,
         "axiom failures " + std::to_string(fails.total()) + ", log/linear mismatches " +
             std::to_string(log_mismatch));
  CHECK(fails.total() == 0);
  CHECK(degenerate_ok);
  CHECK(log_mismatch == 0);
}

TEST_CASE("description-length harness") {
  const auto start = Clock::now();
  const auto out_dir = std::filesystem::path("acceptance_artifacts");
  std::filesystem::create_directories(out_dir);

  ModelConfig model;
  model.layers = 1;
  model.hidden = 16;
  model.heads = 2;
  model.classes = 36;  // fixed output width across the battery
  model.seed = 1;
  TrainConfig train;
  train.epochs = 4;
  train.batch_size = 64;
  train.learning_rate = 3e-3;
  train.seed = 1;
  const MdlSchedule schedule = MdlSchedule::standard();

  // Unlearnable control: random labels must cost one fair coin per example.
  double random_label_error = 1.0;
  std::size_t coded = 0;
  {
    DatasetSpec task;
    task.kind = TaskKind::Contains1;
    task.seq_len = 10;
    task.vocab = 20;
    task.count = 1200;
    task.seed = 17;
    ModelConfig small = model;
    small.classes = 2;
    TrainConfig slow = train;
    slow.learning_rate = 1e-3;
    const MdlResult r = compute_mdl(task, small, slow, schedule, /*random_labels=*/true, 0);
    coded = r.segments.back().end;
    const double uniform = static_cast<double>(coded) * std::log(2.0);
    random_label_error = std::fabs(r.total_nats - uniform) / uniform;
  }

  // Reduced battery: two token-set tasks, three bin counts, contains-1.
  std::vector<DatasetSpec> battery;
  {
    DatasetSpec base;
    base.seq_len = 36;
    base.vocab = 36;
    base.count = 1500;
    auto push = [&](TaskKind kind, int classes, std::vector<int> tokens) {
      DatasetSpec s = base;
      s.kind = kind;
      s.classes = kind == TaskKind::BinCountOnes ? classes : 2;
      s.token_set = std::move(tokens);
      battery.push_back(s);
    };
    push(TaskKind::ContainsTokenSet, 2, {3});
    push(TaskKind::ContainsTokenSet, 2, {3, 7});
    push(TaskKind::BinCountOnes, 2, {});
    push(TaskKind::BinCountOnes, 6, {});
    push(TaskKind::BinCountOnes, 36, {});
    push(TaskKind::Contains1, 2, {});
  }

  std::vector<MdlResult> runs;
  std::vector<std::uint64_t> seeds;
  bool additive = true;
  bool none_diverged = true;
  for (const auto& task_base : battery) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      DatasetSpec task = task_base;
      task.seed = seed;
      ModelConfig m = model;
      m.seed = seed;
      TrainConfig t = train;
      t.seed = seed;
      const MdlResult r = compute_mdl(task, m, t, schedule);
      none_diverged = none_diverged && !r.diverged;
      double total = 0.0;
      for (const auto& seg : r.segments) total += seg.codelength_nats;
      additive = additive && total == r.total_nats;
      runs.push_back(r);
      seeds.push_back(seed);
    }
  }
  write_scatter_csv(out_dir / "fig_entropy_vs_mdl.csv", runs, seeds);

  // Determinism: replaying the first run reproduces the total bit for bit.
  bool deterministic = false;
  {
    DatasetSpec task = battery.front();
    task.seed = 1;
    ModelConfig m = model;
    m.seed = 1;
    TrainConfig t = train;
    t.seed = 1;
    const MdlResult again = compute_mdl(task, m, t, schedule);
    deterministic = again.total_nats == runs.front().total_nats &&
                    again.mean_input_entropy == runs.front().mean_input_entropy;
  }

  std::size_t kept = 0;
  for (const auto& r : runs) kept += r.kept ? 1 : 0;
  const double elapsed = seconds_since(start);
  const bool pass = random_label_error <= 0.05 && additive && none_diverged && deterministic &&
                    runs.size() == 18 && elapsed < 3600.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "random-label dev %.4f (N=%zu), additive=%d, deterministic=%d, runs=%zu "
                "(kept %zu), %.0fs",
                random_label_error, coded, additive ? 1 : 0, deterministic ? 1 : 0, runs.size(),
                kept, elapsed);
  report("description-length harness", pass, buf);
  CHECK(random_label_error <= 0.05);
  CHECK(additive);
  CHECK(none_diverged);
  CHECK(deterministic);
  CHECK(runs.size() == 18);
  CHECK(elapsed < 3600.0);
}

TEST_CASE("backward-pass cost is linear in the edge count") {
  std::mt19937_64 rng(2718);
  std::vector<double> log_edges, log_ops;
  std::stringstream details;
  for (const auto [layers, width] : std::vector<std::pair<int, int>>{
           {25, 20}, {125, 40}, {625, 80}, {3125, 160}}) {
    Tape t = testing::layered_tape(rng, layers, width);
    OpCounts counts;
    backprop<SumProduct>(t, &counts);
    log_edges.push_back(std::log(static_cast<double>(t.edge_count())));
    log_ops.push_back(std::log(static_cast<double>(counts.total())));
    details << t.edge_count() << "->" << counts.total() << " ";
  }
  // Least-squares slope on the log-log points.
  const std::size_t n = log_edges.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += log_edges[i];
    my += log_ops[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (log_edges[i] - mx) * (log_ops[i] - my);
    den += (log_edges[i] - mx) * (log_edges[i] - mx);
  }
  const double slope = num / den;
  const bool pass = std::fabs(slope - 1.0) <= 0.1;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "edges->ops %s slope %.4f", details.str().c_str(), slope);
  report("linear backward-pass cost", pass, buf);
  CHECK(pass);
}
