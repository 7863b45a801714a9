#include "semigrad/ops.hpp"

#include <stdexcept>
#include <string>

namespace semigrad {

namespace {
std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

TensorRef tensor_inputs(Tape& tape, std::vector<int> shape, std::span<const double> values) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor_inputs: value count does not match shape");
  }
  TensorRef t;
  t.shape = std::move(shape);
  t.nodes.reserve(values.size());
  for (double v : values) t.nodes.push_back(tape.add_input(v));
  return t;
}

TensorRef tensor_consts(Tape& tape, std::vector<int> shape, std::span<const double> values) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor_consts: value count does not match shape");
  }
  TensorRef t;
  t.shape = std::move(shape);
  t.nodes.reserve(values.size());
  for (double v : values) t.nodes.push_back(tape.add_const(v));
  return t;
}

NodeId sum_nodes(Tape& tape, std::span<const NodeId> nodes) {
  if (nodes.empty()) throw std::invalid_argument("sum_nodes: empty node list");
  NodeId acc = nodes[0];
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    acc = tape.add_binary(OpKind::Add, acc, nodes[i]);
  }
  return acc;
}

TensorRef ewise_binary(Tape& tape, OpKind k, const TensorRef& a, const TensorRef& b) {
  if (a.shape != b.shape) throw std::invalid_argument("elementwise op: shape mismatch");
  TensorRef r;
  r.shape = a.shape;
  r.nodes.reserve(a.numel());
  for (std::size_t i = 0; i < a.numel(); ++i) {
    r.nodes.push_back(tape.add_binary(k, a.nodes[i], b.nodes[i]));
  }
  return r;
}

TensorRef ewise_unary(Tape& tape, OpKind k, const TensorRef& a) {
  TensorRef r;
  r.shape = a.shape;
  r.nodes.reserve(a.numel());
  for (NodeId n : a.nodes) r.nodes.push_back(tape.add_unary(k, n));
  return r;
}

TensorRef scale(Tape& tape, const TensorRef& a, double factor) {
  const NodeId c = tape.add_const(factor);
  TensorRef r;
  r.shape = a.shape;
  r.nodes.reserve(a.numel());
  for (NodeId n : a.nodes) r.nodes.push_back(tape.add_binary(OpKind::Mul, n, c));
  return r;
}

TensorRef matmul(Tape& tape, const TensorRef& a, const TensorRef& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2) {
    throw std::invalid_argument("matmul: operands must be 2-D");
  }
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                ")");
  }
  const int p = a.rows(), q = a.cols(), r = b.cols();
  TensorRef out;
  out.shape = {p, r};
  out.nodes.reserve(static_cast<std::size_t>(p) * static_cast<std::size_t>(r));
  std::vector<NodeId> terms(static_cast<std::size_t>(q));
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < r; ++j) {
      for (int k = 0; k < q; ++k) {
        terms[static_cast<std::size_t>(k)] = tape.add_binary(OpKind::Mul, a.at(i, k), b.at(k, j));
      }
      out.nodes.push_back(sum_nodes(tape, terms));
    }
  }
  return out;
}

TensorRef softmax(Tape& tape, const TensorRef& logits) {
  if (logits.shape.size() != 1 || logits.numel() == 0) {
    throw std::invalid_argument("softmax: expects a nonempty 1-D tensor");
  }
  const NodeId peak = tape.add_peek_max(logits.nodes);
  TensorRef exps;
  exps.shape = logits.shape;
  exps.nodes.reserve(logits.numel());
  for (NodeId z : logits.nodes) {
    const NodeId shifted = tape.add_binary(OpKind::Sub, z, peak);
    exps.nodes.push_back(tape.add_unary(OpKind::Exp, shifted));
  }
  const NodeId total = sum_nodes(tape, exps.nodes);
  TensorRef out;
  out.shape = logits.shape;
  out.nodes.reserve(logits.numel());
  for (NodeId e : exps.nodes) out.nodes.push_back(tape.add_binary(OpKind::Div, e, total));
  return out;
}

TensorRef layer_norm(Tape& tape, const TensorRef& x, const TensorRef& gain,
                     const TensorRef& bias, double eps) {
  if (x.shape.size() != 1 || x.numel() < 2) {
    throw std::invalid_argument("layer_norm: expects a 1-D tensor with at least 2 elements");
  }
  if (gain.shape != x.shape || bias.shape != x.shape) {
    throw std::invalid_argument("layer_norm: gain/bias shape mismatch");
  }
  const int n = x.shape[0];
  const NodeId inv_n = tape.add_const(1.0 / n);
  const NodeId mean = tape.add_binary(OpKind::Mul, sum_nodes(tape, x.nodes), inv_n);
  std::vector<NodeId> dev(static_cast<std::size_t>(n));
  std::vector<NodeId> dev2(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    dev[static_cast<std::size_t>(i)] = tape.add_binary(OpKind::Sub, x.at(i), mean);
    dev2[static_cast<std::size_t>(i)] =
        tape.add_binary(OpKind::Mul, dev[static_cast<std::size_t>(i)], dev[static_cast<std::size_t>(i)]);
  }
  const NodeId var = tape.add_binary(OpKind::Mul, sum_nodes(tape, dev2), inv_n);
  const NodeId var_eps = tape.add_binary(OpKind::Add, var, tape.add_const(eps));
  const NodeId sd = tape.add_binary(OpKind::Pow, var_eps, tape.add_const(0.5));
  TensorRef out;
  out.shape = x.shape;
  out.nodes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const NodeId norm = tape.add_binary(OpKind::Div, dev[static_cast<std::size_t>(i)], sd);
    const NodeId scaled = tape.add_binary(OpKind::Mul, norm, gain.at(i));
    out.nodes.push_back(tape.add_binary(OpKind::Add, scaled, bias.at(i)));
  }
  return out;
}

TensorRef embedding_row(Tape& tape, const TensorRef& table, int token) {
  if (table.shape.size() != 2) throw std::invalid_argument("embedding_row: table must be 2-D");
  if (token < 0 || token >= table.rows()) {
    throw std::out_of_range("embedding_row: token " + std::to_string(token) +
                            " outside vocabulary of size " + std::to_string(table.rows()));
  }
  TensorRef out;
  out.shape = {table.cols()};
  out.nodes.reserve(static_cast<std::size_t>(table.cols()));
  for (int j = 0; j < table.cols(); ++j) {
    out.nodes.push_back(tape.add_unary(OpKind::Id, table.at(token, j)));
  }
  return out;
}

}  // namespace semigrad
