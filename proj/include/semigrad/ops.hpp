#pragma once

#include <span>
#include <vector>

#include "semigrad/tape.hpp"

namespace semigrad {

/// Shaped view over a contiguous block of scalar tape nodes, row-major.
struct TensorRef {
  std::vector<int> shape;
  std::vector<NodeId> nodes;

  std::size_t numel() const { return nodes.size(); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }
  NodeId at(int i) const { return nodes.at(static_cast<std::size_t>(i)); }
  NodeId at(int i, int j) const {
    return nodes.at(static_cast<std::size_t>(i) * static_cast<std::size_t>(shape.at(1)) +
                    static_cast<std::size_t>(j));
  }
};

TensorRef tensor_inputs(Tape& tape, std::vector<int> shape, std::span<const double> values);
TensorRef tensor_consts(Tape& tape, std::vector<int> shape, std::span<const double> values);

/// Chain of adds over the given nodes; n values cost n-1 Add nodes.
NodeId sum_nodes(Tape& tape, std::span<const NodeId> nodes);

TensorRef ewise_binary(Tape& tape, OpKind k, const TensorRef& a, const TensorRef& b);
TensorRef ewise_unary(Tape& tape, OpKind k, const TensorRef& a);

/// Multiplies every element by the same Const node.
TensorRef scale(Tape& tape, const TensorRef& a, double factor);

/// p×q by q×r lowering into p·r·q Mul nodes and p·r·(q-1) Add nodes.
TensorRef matmul(Tape& tape, const TensorRef& a, const TensorRef& b);

/// 1-D softmax lowered as exp/sum/div. The subtracted max enters as a
/// PeekMax node captured at forward time, so the gradient graph carries no
/// edges through the stabilizer and the partials stay exact at the
/// evaluated point.
TensorRef softmax(Tape& tape, const TensorRef& logits);

/// 1-D layer normalization with affine output; eps sits inside the root.
TensorRef layer_norm(Tape& tape, const TensorRef& x, const TensorRef& gain,
                     const TensorRef& bias, double eps = 1e-5);

/// One row of an embedding table as fresh Id nodes, so every lookup owns a
/// distinct node set even when tokens repeat.
TensorRef embedding_row(Tape& tape, const TensorRef& table, int token);

}  // namespace semigrad
