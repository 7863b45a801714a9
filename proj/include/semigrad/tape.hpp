#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semigrad/semiring.hpp"

namespace semigrad {

enum class OpKind : std::uint8_t {
  Input,
  Const,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Pow,
  Tanh,
  Relu,
  Max2,
  Id,
  /// Value is the max over a recorded source list, treated as a constant:
  /// no graph edges, so no gradient paths pass through it.
  PeekMax,
  /// Node with directly assigned edge partials; not forward-evaluable.
  /// Used for synthetic gradient graphs (tests, imported tapes).
  Opaque,
};

std::string_view op_name(OpKind k);
OpKind op_from_name(std::string_view name);
int op_arity(OpKind k);

/// Raised when a primitive hits a domain error during forward evaluation;
/// carries the offending node.
class EvalError : public std::runtime_error {
 public:
  EvalError(NodeId node, const std::string& what)
      : std::runtime_error("node " + std::to_string(node) + ": " + what), node_(node) {}
  NodeId node() const { return node_; }

 private:
  NodeId node_;
};

/// Append-only scalar computation graph. Node ids are dense and parents
/// always precede children, so the append order is a topological order.
/// forward() caches each node's value and its per-parent local partial;
/// after that the tape doubles as the gradient graph.
class Tape {
 public:
  NodeId add_input(double value = 0.0);
  NodeId add_const(double value);
  NodeId add_unary(OpKind k, NodeId a);
  NodeId add_binary(OpKind k, NodeId a, NodeId b);
  NodeId add_peek_max(std::vector<NodeId> sources);
  /// Appends a node whose edge partials are given directly (op = Opaque,
  /// or Input when parents is empty).
  NodeId add_raw(std::span<const NodeId> parents, std::span<const double> partials);

  void set_output(NodeId id);
  NodeId output() const { return output_; }

  /// Re-points one argument edge; the new parent must still precede the
  /// node. Lets a fixed graph shape be re-wired cheaply (embedding lookups,
  /// loss class) instead of rebuilding the tape.
  void set_parent(NodeId node, int slot, NodeId parent);

  /// Marks a tape built from add_raw as ready for backward passes.
  void seal_raw() { evaluated_ = true; }

  double forward();
  double forward(std::span<const double> input_values);
  void set_input(std::size_t input_index, double v);
  double input_value(std::size_t input_index) const;

  std::size_t size() const { return op_.size(); }
  std::size_t edge_count() const { return edges_; }
  std::size_t input_count() const { return input_ids_.size(); }
  const std::vector<NodeId>& input_ids() const { return input_ids_; }
  bool evaluated() const { return evaluated_; }

  OpKind op(NodeId n) const { return op_[static_cast<std::size_t>(n)]; }
  int arity(NodeId n) const { return arity_[static_cast<std::size_t>(n)]; }
  NodeId parent(NodeId n, int slot) const { return parents_[static_cast<std::size_t>(n)][slot]; }
  double value(NodeId n) const { return value_[static_cast<std::size_t>(n)]; }
  double partial(NodeId n, int slot) const { return partials_[static_cast<std::size_t>(n)][slot]; }
  const std::vector<NodeId>& peek_sources(NodeId n) const;

  /// Keeps allocated capacity; intended for per-example rebuild loops.
  void clear();

  /// Line-delimited text format with a version header; see README.
  void export_text(std::ostream& out) const;
  static Tape import_text(std::istream& in);

 private:
  NodeId append(OpKind k, int arity, NodeId a, NodeId b);
  void check_node(NodeId n, const char* role) const;

  std::vector<OpKind> op_;
  std::vector<std::uint8_t> arity_;
  std::vector<std::array<NodeId, 2>> parents_;
  std::vector<std::array<double, 2>> partials_;
  std::vector<double> value_;
  std::vector<NodeId> input_ids_;
  std::unordered_map<NodeId, std::vector<NodeId>> peek_;
  NodeId output_ = kNoNode;
  std::size_t edges_ = 0;
  bool evaluated_ = false;
};

}  // namespace semigrad
