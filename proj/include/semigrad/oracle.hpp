#pragma once

#include <functional>
#include <span>
#include <vector>

#include "semigrad/backprop.hpp"
#include "semigrad/tape.hpp"

namespace semigrad {

/// All directed paths from one source node to the output, with the product
/// of edge partials along each. Exponential by nature; capped.
struct PathSet {
  NodeId source = kNoNode;
  struct Entry {
    PathWitness edges;
    double product = 1.0;
  };
  std::vector<Entry> paths;
};

class PathCapExceeded : public std::runtime_error {
 public:
  explicit PathCapExceeded(std::size_t cap)
      : std::runtime_error("path enumeration exceeded cap of " + std::to_string(cap)) {}
};

inline constexpr std::size_t kDefaultPathCap = 100000;

/// Depth-first enumeration of every source-to-output path. Refuses (throws
/// PathCapExceeded) rather than silently truncating once `cap` is passed.
PathSet enumerate_paths(const Tape& tape, NodeId source, std::size_t cap = kDefaultPathCap);

/// Literal evaluations of the per-semiring path statistics.
double oracle_sum(const PathSet& paths);

struct OracleMax {
  bool has_path = false;
  double value = 0.0;
  double min_value = 0.0;
  PathWitness argmax;
  /// True when no other path comes within `unique_tol` of the maximum.
  bool unique = true;
};
OracleMax oracle_max(const PathSet& paths, double unique_tol = 1e-12);

EntropyStat oracle_entropy(const PathSet& paths);

/// Central finite differences of the tape's output with respect to each
/// input, evaluated by re-running the forward pass in place.
struct FiniteDifferenceResult {
  std::vector<double> gradient;
  /// Per input: false when a perturbed evaluation was non-finite.
  std::vector<bool> finite;
};
FiniteDifferenceResult finite_difference_grad(Tape& tape, double step = 1e-5);

}  // namespace semigrad
