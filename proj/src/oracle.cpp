#include "semigrad/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace semigrad {

namespace {

/// Consumer adjacency: for each node, the (consumer, argument slot) edges
/// leaving it.
std::vector<std::vector<std::pair<NodeId, int>>> consumer_edges(const Tape& tape) {
  std::vector<std::vector<std::pair<NodeId, int>>> out(tape.size());
  for (NodeId v = 0; v < static_cast<NodeId>(tape.size()); ++v) {
    for (int slot = 0; slot < tape.arity(v); ++slot) {
      out[static_cast<std::size_t>(tape.parent(v, slot))].emplace_back(v, slot);
    }
  }
  return out;
}

}  // namespace

PathSet enumerate_paths(const Tape& tape, NodeId source, std::size_t cap) {
  if (!tape.evaluated()) throw std::logic_error("enumerate_paths: tape not evaluated");
  if (source < 0 || static_cast<std::size_t>(source) >= tape.size()) {
    throw std::out_of_range("enumerate_paths: source not on tape");
  }
  const auto adjacency = consumer_edges(tape);
  const NodeId target = tape.output();

  PathSet result;
  result.source = source;
  if (source == target) {
    result.paths.push_back({PathWitness{}, 1.0});
    return result;
  }

  struct Frame {
    NodeId node;
    std::size_t next_edge;
  };
  std::vector<Frame> stack;
  PathWitness prefix;
  std::vector<double> products{1.0};
  stack.push_back({source, 0});
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& edges = adjacency[static_cast<std::size_t>(top.node)];
    if (top.next_edge >= edges.size()) {
      stack.pop_back();
      if (!prefix.empty()) prefix.pop_back();
      products.pop_back();
      continue;
    }
    const auto [to, slot] = edges[top.next_edge++];
    prefix.push_back(WitnessEdge{top.node, to, slot});
    products.push_back(products.back() * tape.partial(to, slot));
    if (to == target) {
      if (result.paths.size() >= cap) throw PathCapExceeded(cap);
      result.paths.push_back({prefix, products.back()});
      prefix.pop_back();
      products.pop_back();
    } else {
      stack.push_back({to, 0});
    }
  }
  return result;
}

double oracle_sum(const PathSet& paths) {
  double total = 0.0;
  for (const auto& p : paths.paths) total += p.product;
  return total;
}

OracleMax oracle_max(const PathSet& paths, double unique_tol) {
  OracleMax out;
  if (paths.paths.empty()) return out;
  out.has_path = true;
  out.value = paths.paths.front().product;
  out.min_value = out.value;
  out.argmax = paths.paths.front().edges;
  for (std::size_t i = 1; i < paths.paths.size(); ++i) {
    const double v = paths.paths[i].product;
    if (v > out.value) {
      out.value = v;
      out.argmax = paths.paths[i].edges;
    }
    out.min_value = std::min(out.min_value, v);
  }
  std::size_t near = 0;
  for (const auto& p : paths.paths) {
    if (std::fabs(p.product - out.value) <= unique_tol * std::max(1.0, std::fabs(out.value))) {
      ++near;
    }
  }
  out.unique = near == 1;
  return out;
}

EntropyStat oracle_entropy(const PathSet& paths) {
  double z = 0.0;
  for (const auto& p : paths.paths) z += std::fabs(p.product);
  if (!(z > 0.0)) return {0.0, false};
  double h = 0.0;
  for (const auto& p : paths.paths) {
    const double m = std::fabs(p.product);
    if (m == 0.0) continue;
    const double q = m / z;
    h -= q * std::log(q);
  }
  return {h, true};
}

FiniteDifferenceResult finite_difference_grad(Tape& tape, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite differences need a positive step");
  FiniteDifferenceResult out;
  const std::size_t n = tape.input_count();
  out.gradient.resize(n, 0.0);
  out.finite.resize(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    const double base = tape.input_value(i);
    tape.set_input(i, base + step);
    const double up = tape.forward();
    tape.set_input(i, base - step);
    const double down = tape.forward();
    tape.set_input(i, base);
    out.gradient[i] = (up - down) / (2.0 * step);
    out.finite[i] = std::isfinite(up) && std::isfinite(down);
  }
  tape.forward();  // restore cached values and partials at the base point
  return out;
}

}  // namespace semigrad
