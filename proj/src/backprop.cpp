#include "semigrad/backprop.hpp"

namespace semigrad {

double replay_witness(const Tape& tape, const PathWitness& path) {
  double product = 1.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const WitnessEdge& e = path[i];
    if (e.arg < 0 || e.arg >= tape.arity(e.to) || tape.parent(e.to, e.arg) != e.from) {
      throw std::invalid_argument("witness edge " + std::to_string(i) +
                                  " is not an edge of the tape");
    }
    if (i > 0 && path[i - 1].to != e.from) {
      throw std::invalid_argument("witness edges do not form a connected path");
    }
    product *= tape.partial(e.to, e.arg);
  }
  if (!path.empty() && path.back().to != tape.output()) {
    throw std::invalid_argument("witness does not end at the output node");
  }
  return product;
}

}  // namespace semigrad
