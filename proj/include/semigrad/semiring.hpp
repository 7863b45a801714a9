#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace semigrad {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class SemiringId {
  SumProduct,
  MaxProduct,
  Entropy,
  LogEntropy,
  LogMaxProduct,
};

std::string_view semiring_name(SemiringId id);
SemiringId semiring_from_name(std::string_view name);

/// Which extremum chain a witness step continues along at the next node.
enum class Chain : std::uint8_t { Hi = 0, Lo = 1 };

/// One back-pointer of the extremal-path dynamic program: the path leaves the
/// current node along the edge into consumer `to` (argument slot `arg` of
/// `to`) and continues along the `via` chain stored at `to`.
struct BackStep {
  NodeId to = kNoNode;
  std::int16_t arg = -1;
  Chain via = Chain::Hi;

  bool valid() const { return to != kNoNode; }
};

/// Deterministic order for breaking exact value ties: prefer the edge with
/// the smaller (consumer id, argument slot); steps without an edge sort last.
inline bool back_step_before(const BackStep& a, const BackStep& b) {
  if (a.valid() != b.valid()) return a.valid();
  if (a.to != b.to) return a.to < b.to;
  return a.arg < b.arg;
}

template <class S>
concept Semiring = requires(const typename S::Value& a, const typename S::Value& b, double w) {
  { S::zero() } -> std::convertible_to<typename S::Value>;
  { S::one() } -> std::convertible_to<typename S::Value>;
  { S::plus(a, b) } -> std::convertible_to<typename S::Value>;
  { S::times(a, b) } -> std::convertible_to<typename S::Value>;
  { S::lift(w) } -> std::convertible_to<typename S::Value>;
  { S::lift_edge(w, NodeId{}, int{}) } -> std::convertible_to<typename S::Value>;
};

// ---------------------------------------------------------------------------
// Sum-product: ordinary reverse-mode gradients.
// ---------------------------------------------------------------------------

struct SumProduct {
  using Value = double;
  static constexpr SemiringId id = SemiringId::SumProduct;

  static Value zero() { return 0.0; }
  static Value one() { return 1.0; }
  static Value plus(Value a, Value b) { return a + b; }
  static Value times(Value a, Value b) { return a * b; }
  static Value lift(double w) { return w; }
  static Value lift_edge(double w, NodeId, int) { return w; }
  static double finalize(Value v) { return v; }
};

// ---------------------------------------------------------------------------
// Max-product with provenance.
//
// A value is the pair of extremes (hi = maximum, lo = minimum) over the
// products of some set of paths, plus one back-pointer per extreme so the
// attaining path can be replayed. The additive identity is the empty path
// set. Multiplication composes the extremes of two path sets: the extreme of
// the pairwise products is attained at a corner because the product is
// monotone in each factor.
// ---------------------------------------------------------------------------

namespace detail {

struct LinearNum {
  using Rep = double;
  static double rep_of(double w) { return w; }
  static double mul(double a, double b) { return a * b; }
  static bool less(double a, double b) { return a < b; }
  static double to_double(double a) { return a; }
};

/// sign * exp(lg); sign == 0 encodes an exact zero.
struct SignedLog {
  std::int8_t sign = 0;
  double lg = -std::numeric_limits<double>::infinity();
};

struct SignedLogNum {
  using Rep = SignedLog;
  static SignedLog rep_of(double w) {
    if (w == 0.0) return {};
    return {static_cast<std::int8_t>(w > 0.0 ? 1 : -1), std::log(std::fabs(w))};
  }
  static SignedLog mul(SignedLog a, SignedLog b) {
    if (a.sign == 0 || b.sign == 0) return {};
    return {static_cast<std::int8_t>(a.sign * b.sign), a.lg + b.lg};
  }
  static bool less(SignedLog a, SignedLog b) {
    if (a.sign != b.sign) return a.sign < b.sign;
    if (a.sign == 0) return false;
    return a.sign > 0 ? a.lg < b.lg : a.lg > b.lg;
  }
  static double to_double(SignedLog a) { return a.sign == 0 ? 0.0 : a.sign * std::exp(a.lg); }
};

template <class Num>
struct Extrema {
  bool empty = true;
  typename Num::Rep hi{};
  typename Num::Rep lo{};
  BackStep hi_back{};
  BackStep lo_back{};
};

template <class Num>
struct ExtremalProduct {
  using Value = Extrema<Num>;

  static Value zero() { return {}; }

  static Value one() {
    Value v;
    v.empty = false;
    v.hi = Num::rep_of(1.0);
    v.lo = v.hi;
    return v;
  }

  static Value lift_edge(double w, NodeId to, int arg) {
    Value v;
    v.empty = false;
    v.hi = Num::rep_of(w);
    v.lo = v.hi;
    v.hi_back = BackStep{to, static_cast<std::int16_t>(arg), Chain::Hi};
    v.lo_back = v.hi_back;
    return v;
  }

  static Value lift(double w) { return lift_edge(w, kNoNode, -1); }

  static Value plus(const Value& a, const Value& b) {
    if (a.empty) return b;
    if (b.empty) return a;
    Value r;
    r.empty = false;
    if (Num::less(a.hi, b.hi)) {
      r.hi = b.hi;
      r.hi_back = b.hi_back;
    } else if (Num::less(b.hi, a.hi)) {
      r.hi = a.hi;
      r.hi_back = a.hi_back;
    } else {
      r.hi = a.hi;
      r.hi_back = back_step_before(b.hi_back, a.hi_back) ? b.hi_back : a.hi_back;
    }
    if (Num::less(b.lo, a.lo)) {
      r.lo = b.lo;
      r.lo_back = b.lo_back;
    } else if (Num::less(a.lo, b.lo)) {
      r.lo = a.lo;
      r.lo_back = a.lo_back;
    } else {
      r.lo = a.lo;
      r.lo_back = back_step_before(b.lo_back, a.lo_back) ? b.lo_back : a.lo_back;
    }
    return r;
  }

  static Value times(const Value& a, const Value& b) {
    if (a.empty || b.empty) return {};
    struct Corner {
      typename Num::Rep v;
      const BackStep* from_a;
      Chain via;
    };
    const Corner corners[4] = {
        {Num::mul(a.hi, b.hi), &a.hi_back, Chain::Hi},
        {Num::mul(a.hi, b.lo), &a.hi_back, Chain::Lo},
        {Num::mul(a.lo, b.hi), &a.lo_back, Chain::Hi},
        {Num::mul(a.lo, b.lo), &a.lo_back, Chain::Lo},
    };
    int best_hi = 0, best_lo = 0;
    for (int i = 1; i < 4; ++i) {
      if (Num::less(corners[best_hi].v, corners[i].v)) best_hi = i;
      if (Num::less(corners[i].v, corners[best_lo].v)) best_lo = i;
    }
    Value r;
    r.empty = false;
    r.hi = corners[best_hi].v;
    r.hi_back = *corners[best_hi].from_a;
    r.hi_back.via = corners[best_hi].via;
    r.lo = corners[best_lo].v;
    r.lo_back = *corners[best_lo].from_a;
    r.lo_back.via = corners[best_lo].via;
    return r;
  }
};

}  // namespace detail

using PathExtrema = detail::Extrema<detail::LinearNum>;
using LogPathExtrema = detail::Extrema<detail::SignedLogNum>;

struct MaxProduct : detail::ExtremalProduct<detail::LinearNum> {
  static constexpr SemiringId id = SemiringId::MaxProduct;
  /// The max-product statistic; only meaningful when the path set is nonempty.
  static double finalize(const Value& v) { return v.empty ? 0.0 : v.hi; }
  static double min_product(const Value& v) { return v.empty ? 0.0 : v.lo; }
};

struct LogMaxProduct : detail::ExtremalProduct<detail::SignedLogNum> {
  static constexpr SemiringId id = SemiringId::LogMaxProduct;
  static double finalize(const Value& v) {
    return v.empty ? 0.0 : detail::SignedLogNum::to_double(v.hi);
  }
};

inline bool extrema_equal(const PathExtrema& a, const PathExtrema& b) {
  if (a.empty != b.empty) return false;
  if (a.empty) return true;
  return a.hi == b.hi && a.lo == b.lo;
}

// ---------------------------------------------------------------------------
// Entropy via the expectation semiring.
//
// A value ⟨z, s⟩ accumulates z = Σ_p |g(p)| and s = Σ_p |g(p)| log |g(p)|
// over a set of paths. The path entropy is finalized as log z − s / z.
// The lift uses the convention 0 · log 0 = 0 so that ⟨0, 0⟩ is exactly the
// annihilator.
// ---------------------------------------------------------------------------

struct EntropyStat {
  double nats = 0.0;
  /// False when the path set had zero total mass (entropy undefined).
  bool defined = false;
};

struct WeightedLogMass {
  double z = 0.0;
  double s = 0.0;
};

struct Entropy {
  using Value = WeightedLogMass;
  static constexpr SemiringId id = SemiringId::Entropy;

  static Value zero() { return {0.0, 0.0}; }
  static Value one() { return {1.0, 0.0}; }

  static Value plus(const Value& a, const Value& b) { return {a.z + b.z, a.s + b.s}; }

  static Value times(const Value& a, const Value& b) {
    const double z = a.z * b.z;
    if (z == 0.0) return {0.0, 0.0};
    return {z, a.z * b.s + a.s * b.z};
  }

  static Value lift(double w) {
    const double m = std::fabs(w);
    if (m == 0.0) return {0.0, 0.0};
    return {m, m * std::log(m)};
  }
  static Value lift_edge(double w, NodeId, int) { return lift(w); }

  static EntropyStat finalize(const Value& v) {
    if (!(v.z > 0.0)) return {0.0, false};
    return {std::log(v.z) - v.s / v.z, true};
  }
};

// ---------------------------------------------------------------------------
// Log-domain entropy: the same algebra carried as ⟨ℓ, r⟩ = ⟨log z, s / z⟩.
// ⊗ adds both components; ⊕ is log-sum-exp on ℓ and the softmax-weighted
// mean on r. Immune to the underflow of long low-weight paths.
// ---------------------------------------------------------------------------

struct LogWeightedMass {
  double log_z = -std::numeric_limits<double>::infinity();
  double mean_log = 0.0;

  bool is_zero() const { return std::isinf(log_z) && log_z < 0.0; }
};

struct LogEntropy {
  using Value = LogWeightedMass;
  static constexpr SemiringId id = SemiringId::LogEntropy;

  static Value zero() { return {}; }
  static Value one() { return {0.0, 0.0}; }

  static Value plus(const Value& a, const Value& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    const double m = std::max(a.log_z, b.log_z);
    const double ea = std::exp(a.log_z - m);
    const double eb = std::exp(b.log_z - m);
    const double total = ea + eb;
    return {m + std::log(total), (ea * a.mean_log + eb * b.mean_log) / total};
  }

  static Value times(const Value& a, const Value& b) {
    if (a.is_zero() || b.is_zero()) return {};
    return {a.log_z + b.log_z, a.mean_log + b.mean_log};
  }

  static Value lift(double w) {
    const double m = std::fabs(w);
    if (m == 0.0) return {};
    const double lg = std::log(m);
    return {lg, lg};
  }
  static Value lift_edge(double w, NodeId, int) { return lift(w); }

  static EntropyStat finalize(const Value& v) {
    if (v.is_zero()) return {0.0, false};
    return {v.log_z - v.mean_log, true};
  }
};

static_assert(Semiring<SumProduct>);
static_assert(Semiring<MaxProduct>);
static_assert(Semiring<LogMaxProduct>);
static_assert(Semiring<Entropy>);
static_assert(Semiring<LogEntropy>);

}  // namespace semigrad
