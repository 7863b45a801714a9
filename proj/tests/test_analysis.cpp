#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "semigrad/analysis.hpp"
#include "semigrad/backprop.hpp"

using namespace semigrad;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 4;
  cfg.heads = 2;
  cfg.vocab = 6;
  cfg.seq_len = 4;
  cfg.classes = 2;
  cfg.seed = 5;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("token positions classify into first/repeat/other") {
  const std::vector<int> tokens{3, 1, 3, 7};
  CHECK(classify_position(tokens, 0) == TokenType::First);
  CHECK(classify_position(tokens, 1) == TokenType::Other);
  CHECK(classify_position(tokens, 2) == TokenType::Repeat);
  CHECK(classify_position(tokens, 3) == TokenType::Other);
}

TEST_CASE("branch attribution emits one row per layer and position") {
  const ModelConfig cfg = tiny_config();
  ParamStore params = ParamStore::init_transformer(cfg);
  const std::vector<int> tokens{2, 5, 1, 3};
  const BranchReport report = branch_attribution(cfg, params, tokens, 1);
  REQUIRE(report.rows.size() == 4);  // 1 layer x 4 positions
  CHECK(report.rival != report.label);
  for (const auto& row : report.rows) {
    CHECK(row.argmax_branch >= 0);
    CHECK(row.argmax_branch < kBranchCount);
    double share = 0.0;
    int best = 0;
    for (int b = 0; b < kBranchCount; ++b) {
      CHECK(row.reachable[static_cast<std::size_t>(b)]);
      share += row.normalized_abs[static_cast<std::size_t>(b)];
      if (row.value[static_cast<std::size_t>(b)] > row.value[static_cast<std::size_t>(best)]) {
        best = b;
      }
    }
    CHECK(share == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(best == row.argmax_branch);
  }
}

TEST_CASE("branch max-consistency: hidden adjoint equals the branch maximum") {
  const ModelConfig cfg = tiny_config();
  ParamStore params = ParamStore::init_transformer(cfg);
  Tape tape;
  const std::vector<int> tokens{2, 5, 1, 3};
  const ModelGraph g = build_transformer(tape, cfg, params, tokens);
  tape.set_output(append_decision_margin(tape, g.logits, 1, 0));
  tape.forward();
  const auto store = backprop<MaxProduct>(tape);
  for (const auto& per_pos : g.anchors.ids) {
    for (const auto& slots : per_pos) {
      // Union of the four anchor sets vs the hidden nodes they copy.
      std::vector<NodeId> hidden;
      for (NodeId n : slots[0]) hidden.push_back(tape.parent(n, 0));
      const auto direct = aggregate<MaxProduct>(store, hidden);
      PathExtrema through = MaxProduct::zero();
      for (int b = 0; b < kBranchCount; ++b) {
        through = MaxProduct::plus(
            through, aggregate<MaxProduct>(store, slots[static_cast<std::size_t>(b)]));
      }
      REQUIRE_FALSE(direct.empty);
      REQUIRE_FALSE(through.empty);
      CHECK(std::fabs(direct.hi - through.hi) <= 1e-9 * std::max(1.0, std::fabs(direct.hi)));
    }
  }
}

TEST_CASE("scaling the analysis scalar preserves argmax branches and scales values") {
  const ModelConfig cfg = tiny_config();
  ParamStore params = ParamStore::init_transformer(cfg);
  const std::vector<int> tokens{2, 5, 1, 3};

  Tape tape;
  const ModelGraph g = build_transformer(tape, cfg, params, tokens);
  const NodeId margin = append_decision_margin(tape, g.logits, 1, 0);
  tape.set_output(margin);
  tape.forward();
  const auto base = backprop<MaxProduct>(tape);

  const double c = 3.5;
  const NodeId scaled = tape.add_binary(OpKind::Mul, margin, tape.add_const(c));
  tape.set_output(scaled);
  tape.forward();
  const auto bumped = backprop<MaxProduct>(tape);

  for (const auto& per_pos : g.anchors.ids) {
    for (const auto& slots : per_pos) {
      int argmax_a = -1, argmax_b = -1;
      double best_a = 0.0, best_b = 0.0;
      for (int b = 0; b < kBranchCount; ++b) {
        const auto va = aggregate<MaxProduct>(base, slots[static_cast<std::size_t>(b)]);
        const auto vb = aggregate<MaxProduct>(bumped, slots[static_cast<std::size_t>(b)]);
        REQUIRE_FALSE(va.empty);
        CHECK(vb.hi == doctest::Approx(c * va.hi).epsilon(1e-12));
        if (argmax_a < 0 || va.hi > best_a) {
          best_a = va.hi;
          argmax_a = b;
        }
        if (argmax_b < 0 || vb.hi > best_b) {
          best_b = vb.hi;
          argmax_b = b;
        }
      }
      CHECK(argmax_a == argmax_b);
    }
  }
}

TEST_CASE("a zero-layer model has no branch rows") {
  ModelConfig cfg = tiny_config();
  cfg.layers = 0;
  ParamStore params = ParamStore::init_transformer(cfg);
  const BranchReport report = branch_attribution(cfg, params, std::vector<int>{2, 5, 1, 3}, 1);
  CHECK(report.rows.empty());
  const BranchSummary summary =
      summarize_final_layer(cfg, params, std::vector<Example>{{{2, 5, 1, 3}, 1}});
  CHECK(summary.examples_used == 0);
}

TEST_CASE("entropy of inputs yields defined nonnegative rows") {
  const ModelConfig cfg = tiny_config();
  ParamStore params = ParamStore::init_transformer(cfg);
  const EntropyReport report =
      entropy_of_inputs(cfg, params, std::vector<int>{2, 5, 1, 3}, 1);
  REQUIRE(report.rows.size() == 4);
  CHECK(report.undefined_rows == 0);
  for (const auto& row : report.rows) {
    CHECK(row.defined);
    CHECK(row.nats >= -1e-9);
  }
  CHECK(report.mean_nats > 0.0);
}

TEST_CASE("mlp feature entropy has one row per feature") {
  MlpConfig cfg;
  cfg.hidden = 8;
  cfg.seed = 9;
  ParamStore params = ParamStore::init_mlp(cfg);
  const std::vector<double> features{0.9, 0.1, 0.4, 0.6};
  const EntropyReport report = entropy_of_features(cfg, params, features, 1);
  REQUIRE(report.rows.size() == 4);
  for (const auto& row : report.rows) CHECK(row.defined);
}

TEST_CASE("mdl schedule validation and additivity on a small run") {
  MdlSchedule bad;
  bad.fractions = {0.5, 0.4, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_NOTHROW(MdlSchedule::standard().validate());

  DatasetSpec task;
  task.kind = TaskKind::Contains1;
  task.seq_len = 4;
  task.vocab = 6;
  task.count = 120;
  task.seed = 13;

  ModelConfig model = tiny_config();
  TrainConfig train;
  train.epochs = 2;
  train.batch_size = 16;

  MdlSchedule schedule;
  schedule.fractions = {0.1, 0.5, 1.0};
  const MdlResult result = compute_mdl(task, model, train, schedule);
  REQUIRE_FALSE(result.diverged);
  REQUIRE(result.segments.size() == 3);
  double total = 0.0;
  for (const auto& seg : result.segments) total += seg.codelength_nats;
  CHECK(total == result.total_nats);  // exact additivity
  CHECK(result.segments[0].train_prefix == 0);
  CHECK(result.segments[0].codelength_nats ==
        doctest::Approx(static_cast<double>(result.segments[0].end) * std::log(2.0)));

  // Segments partition the training split.
  for (std::size_t i = 1; i < result.segments.size(); ++i) {
    CHECK(result.segments[i].begin == result.segments[i - 1].end);
    CHECK(result.segments[i].train_prefix == result.segments[i].begin);
  }
  CHECK(result.segments.back().end == 108);  // 90% of 120

  // Deterministic: a second run produces the same codelengths.
  const MdlResult again = compute_mdl(task, model, train, schedule);
  CHECK(again.total_nats == result.total_nats);
  CHECK(again.final_val_accuracy == result.final_val_accuracy);
}

TEST_CASE("report artifacts are deterministic byte-for-byte") {
  const auto dir = std::filesystem::temp_directory_path() / "semigrad-test-report";
  std::filesystem::create_directories(dir);

  BranchSummary summary;
  summary.examples_used = 3;
  summary.argmax_share[0][3] = 0.75;
  summary.mean_abs_value[1][1] = 1.25e-3;
  summary.positions_seen = {3, 3, 6};
  write_branch_summary_csv(dir / "a.csv", summary);
  write_branch_summary_csv(dir / "b.csv", summary);
  const std::string a = slurp(dir / "a.csv");
  CHECK(a == slurp(dir / "b.csv"));
  CHECK(a.find("token_type,branch,argmax_share,mean_abs_value,positions") == 0);
  CHECK(a.find("first,queries,0.75") != std::string::npos);

  std::vector<LengthSweepRow> rows{{4, 1.5, 10}, {8, 2.5, 10}};
  write_length_sweep_csv(dir / "len.csv", rows);
  CHECK(slurp(dir / "len.csv") ==
        "length,mean_entropy_nats,examples\n4,1.5,10\n8,2.5,10\n");

  std::filesystem::remove_all(dir);
}

TEST_CASE("config hashes are stable") {
  CHECK(config_hash_hex("abc") == config_hash_hex("abc"));
  CHECK(config_hash_hex("abc") != config_hash_hex("abd"));
  CHECK(config_hash_hex("x").size() == 16);
}
