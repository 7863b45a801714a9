#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "semigrad/semiring.hpp"
#include "semigrad/tape.hpp"

namespace semigrad {

/// Counts ⊕/⊗ applications of one backward pass. Exactly one of each is
/// applied per gradient-graph edge, independent of how many paths exist.
struct OpCounts {
  std::uint64_t plus = 0;
  std::uint64_t times = 0;
  std::uint64_t total() const { return plus + times; }
};

/// Reverse-topological adjoint accumulation generalized over a semiring.
/// After the pass, out[v] is the ⊕ over all paths from v to the output of
/// the ⊗ of lifted edge partials along the path. With SumProduct this is the
/// ordinary gradient. The tape order itself serves as the topological order.
template <Semiring S>
void backprop_into(const Tape& tape, std::vector<typename S::Value>& out,
                   OpCounts* counts = nullptr) {
  if (!tape.evaluated()) {
    throw std::logic_error("backprop: tape has not been forward-evaluated");
  }
  const NodeId n = static_cast<NodeId>(tape.size());
  out.assign(static_cast<std::size_t>(n), S::zero());
  out[static_cast<std::size_t>(tape.output())] = S::one();
  OpCounts local;
  for (NodeId i = n - 1; i >= 0; --i) {
    const int k = tape.arity(i);
    if (k == 0) continue;
    const auto downstream = out[static_cast<std::size_t>(i)];
    for (int slot = 0; slot < k; ++slot) {
      const NodeId u = tape.parent(i, slot);
      auto& acc = out[static_cast<std::size_t>(u)];
      acc = S::plus(acc, S::times(S::lift_edge(tape.partial(i, slot), i, slot), downstream));
      ++local.plus;
      ++local.times;
    }
  }
  if (counts) *counts = local;
}

template <Semiring S>
std::vector<typename S::Value> backprop(const Tape& tape, OpCounts* counts = nullptr) {
  std::vector<typename S::Value> out;
  backprop_into<S>(tape, out, counts);
  return out;
}

/// ⊕-combination of adjoints across a node set, e.g. the dimensions of one
/// token's embedding. An empty set yields the additive identity.
template <Semiring S>
typename S::Value aggregate(const std::vector<typename S::Value>& store,
                            std::span<const NodeId> nodes) {
  auto acc = S::zero();
  for (NodeId v : nodes) acc = S::plus(acc, store.at(static_cast<std::size_t>(v)));
  return acc;
}

// ---------------------------------------------------------------------------
// Witness reconstruction for the extremal-path semirings.
// ---------------------------------------------------------------------------

/// One edge of a source-to-output path: `from` is argument slot `arg` of
/// `to`.
struct WitnessEdge {
  NodeId from = kNoNode;
  NodeId to = kNoNode;
  int arg = -1;

  bool operator==(const WitnessEdge&) const = default;
};

using PathWitness = std::vector<WitnessEdge>;

/// Follows the stored back-pointers from `source` toward the output,
/// switching between the hi/lo chains as the sign cases recorded during
/// accumulation dictate. Unreachable sources yield an empty witness.
template <class Num>
PathWitness witness_path(const std::vector<detail::Extrema<Num>>& store, NodeId source) {
  PathWitness path;
  const auto& start = store.at(static_cast<std::size_t>(source));
  if (start.empty) return path;
  NodeId cur = source;
  Chain chain = Chain::Hi;
  for (;;) {
    const auto& v = store[static_cast<std::size_t>(cur)];
    const BackStep& step = chain == Chain::Hi ? v.hi_back : v.lo_back;
    if (!step.valid()) break;
    if (step.to <= cur) throw std::logic_error("witness back-pointer does not advance");
    path.push_back(WitnessEdge{cur, step.to, step.arg});
    chain = step.via;
    cur = step.to;
  }
  return path;
}

/// Product of the tape's cached partials along a witness, after validating
/// that the edges form a directed path ending at the output. A valid empty
/// witness (source == output) replays to 1.
double replay_witness(const Tape& tape, const PathWitness& path);

}  // namespace semigrad
