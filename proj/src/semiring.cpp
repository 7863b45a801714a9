#include "semigrad/semiring.hpp"

#include <stdexcept>
#include <string>

namespace semigrad {

std::string_view semiring_name(SemiringId id) {
  switch (id) {
    case SemiringId::SumProduct: return "sum-product";
    case SemiringId::MaxProduct: return "max-product";
    case SemiringId::Entropy: return "entropy";
    case SemiringId::LogEntropy: return "log-entropy";
    case SemiringId::LogMaxProduct: return "log-max-product";
  }
  return "unknown";
}

SemiringId semiring_from_name(std::string_view name) {
  if (name == "sum-product" || name == "sum") return SemiringId::SumProduct;
  if (name == "max-product" || name == "max") return SemiringId::MaxProduct;
  if (name == "entropy") return SemiringId::Entropy;
  if (name == "log-entropy") return SemiringId::LogEntropy;
  if (name == "log-max-product") return SemiringId::LogMaxProduct;
  throw std::invalid_argument("unknown semiring: " + std::string(name));
}

}  // namespace semigrad
