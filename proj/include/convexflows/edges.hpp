#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "convexflows/incidence.hpp"
#include "convexflows/objectives.hpp"

namespace convexflows {

// ---------------------------------------------------------------------------
// Two-node gain edges. A gain edge accepts w >= 0 units at its source slot
// and emits at most h(w) at its sink slot, h concave, nondecreasing on
// [0, ub], h(0) = 0. The edge's allowable-flow set is { (z1, z2) :
// -ub <= z1 <= 0, z2 <= h(-z1) } and its support function reduces to the
// scalar arbitrage problem  max_w  -eta1 w + eta2 h(w).
// ---------------------------------------------------------------------------

// Transmission line with logarithmic loss: h(w) = 3w - a(log(1+e^{bw}) - log 2)
// with a*b = 4. h'(0) = 1, so the line is never used against a price ratio
// of one or worse.
struct PowerLineGain {
  double alpha;
  double beta;
};

// Battery-style storage: h(w) = gamma_s w - (eps/2) w^2. The quadratic term
// regularizes an otherwise linear gain; ub must not exceed gamma_s/eps so h
// stays increasing on its domain.
struct StorageGain {
  double gamma_s;
  double eps_reg;
};

// Lossless capacitated link, same regularization with unit efficiency.
struct LosslessGain {
  double eps_reg;
};

// Uniswap v2 style market: h(w) = r2 * fee * w / (r1 + fee * w).
struct UniswapGain {
  double r1;
  double r2;
  double fee;
};

// Two-asset weighted geometric-mean market:
// h(w) = r2 (1 - (r1/(r1 + fee w))^{weight/(1-weight)}).
// No closed-form arbitrage is wired up for this family; it deliberately
// exercises the generic bisection path.
struct BalancerTwoGain {
  double r1;
  double r2;
  double weight;
  double fee;
};

// Square-root gain h(w) = sqrt(b + g w) - sqrt(b), the buyer-good utility
// edge of the market-clearing experiment.
struct SqrtGain {
  double b;
  double g;
};

// User-supplied gain oracle. dh and wstar are optional; wstar, when present,
// maps the price ratio eta1/eta2 to the unclamped arbitrage input.
struct CustomGain {
  std::function<double(double)> h;
  std::function<double(double)> dh;
  std::function<double(double)> wstar;
};

using GainFamily = std::variant<PowerLineGain, StorageGain, LosslessGain,
                                UniswapGain, BalancerTwoGain, SqrtGain,
                                CustomGain>;

class GainEdge {
 public:
  GainEdge(IncidenceMap map, GainFamily family, double ub)
      : map_(std::move(map)), family_(std::move(family)), ub_(ub) {
    if (map_.dim() != 2) {
      throw std::invalid_argument("GainEdge: incidence map must have length 2");
    }
    if (!(ub_ > 0.0) || !std::isfinite(ub_)) {
      throw std::invalid_argument("GainEdge: ub must be finite and positive");
    }
    validate_family();
  }

  const IncidenceMap& map() const { return map_; }
  NodeIndex source() const { return map_.node(0); }
  NodeIndex sink() const { return map_.node(1); }
  double ub() const { return ub_; }
  const GainFamily& family() const { return family_; }

  // h(w) on [0, ub], -inf outside.
  double gain(double w) const {
    if (w < 0.0 || w > ub_) return -kInf;
    const double v = gain_unchecked(w);
    if (!std::isfinite(v)) {
      throw std::runtime_error("edge oracle domain error");
    }
    return v;
  }

  // h'(w): analytic when the family provides it, otherwise a forward
  // difference at step 1e-7 * max(1, ub) (backward at the capacity end).
  double dgain(double w) const {
    if (std::holds_alternative<PowerLineGain>(family_)) {
      const auto& f = std::get<PowerLineGain>(family_);
      return 3.0 - f.alpha * f.beta * sigmoid(f.beta * w);
    }
    if (std::holds_alternative<StorageGain>(family_)) {
      const auto& f = std::get<StorageGain>(family_);
      return f.gamma_s - f.eps_reg * w;
    }
    if (std::holds_alternative<LosslessGain>(family_)) {
      return 1.0 - std::get<LosslessGain>(family_).eps_reg * w;
    }
    if (std::holds_alternative<UniswapGain>(family_)) {
      const auto& f = std::get<UniswapGain>(family_);
      const double denom = f.r1 + f.fee * w;
      return f.r2 * f.fee * f.r1 / (denom * denom);
    }
    if (std::holds_alternative<BalancerTwoGain>(family_)) {
      const auto& f = std::get<BalancerTwoGain>(family_);
      const double q = f.weight / (1.0 - f.weight);
      const double denom = f.r1 + f.fee * w;
      return f.r2 * q * f.fee * std::pow(f.r1 / denom, q) / denom;
    }
    if (std::holds_alternative<SqrtGain>(family_)) {
      const auto& f = std::get<SqrtGain>(family_);
      return 0.5 * f.g / std::sqrt(f.b + f.g * w);
    }
    const auto& f = std::get<CustomGain>(family_);
    if (f.dh) return f.dh(w);
    const double step = 1e-7 * std::max(1.0, ub_);
    if (w + step <= ub_) return (gain(w + step) - gain(w)) / step;
    return (gain(w) - gain(w - step)) / step;
  }

  bool has_derivative() const {
    if (std::holds_alternative<CustomGain>(family_)) {
      return static_cast<bool>(std::get<CustomGain>(family_).dh);
    }
    return true;
  }

  bool has_closed_form() const {
    if (std::holds_alternative<BalancerTwoGain>(family_)) return false;
    if (std::holds_alternative<CustomGain>(family_)) {
      return static_cast<bool>(std::get<CustomGain>(family_).wstar);
    }
    return true;
  }

  // Closed-form solution of h'(w) = ratio, clamped to [0, ub]. Only valid
  // when has_closed_form().
  double closed_form_wstar(double ratio) const {
    double w = 0.0;
    if (std::holds_alternative<PowerLineGain>(family_)) {
      const auto& f = std::get<PowerLineGain>(family_);
      if (ratio >= 1.0) return 0.0;
      w = std::log((3.0 - ratio) / (1.0 + ratio)) / f.beta;
    } else if (std::holds_alternative<StorageGain>(family_)) {
      const auto& f = std::get<StorageGain>(family_);
      if (ratio >= f.gamma_s) return 0.0;
      w = (f.gamma_s - ratio) / f.eps_reg;
    } else if (std::holds_alternative<LosslessGain>(family_)) {
      const auto& f = std::get<LosslessGain>(family_);
      if (ratio >= 1.0) return 0.0;
      w = (1.0 - ratio) / f.eps_reg;
    } else if (std::holds_alternative<UniswapGain>(family_)) {
      const auto& f = std::get<UniswapGain>(family_);
      if (ratio <= 0.0) return ub_;
      if (ratio >= f.fee * f.r2 / f.r1) return 0.0;
      w = (std::sqrt(f.fee * f.r1 * f.r2 / ratio) - f.r1) / f.fee;
    } else if (std::holds_alternative<SqrtGain>(family_)) {
      const auto& f = std::get<SqrtGain>(family_);
      if (ratio <= 0.0) return ub_;
      if (ratio >= 0.5 * f.g / std::sqrt(f.b)) return 0.0;
      w = 0.25 * f.g / (ratio * ratio) - f.b / f.g;
    } else {
      w = std::get<CustomGain>(family_).wstar(ratio);
    }
    return std::clamp(w, 0.0, ub_);
  }

 private:
  double gain_unchecked(double w) const {
    if (std::holds_alternative<PowerLineGain>(family_)) {
      const auto& f = std::get<PowerLineGain>(family_);
      return 3.0 * w - f.alpha * (log1pexp(f.beta * w) - std::log(2.0));
    }
    if (std::holds_alternative<StorageGain>(family_)) {
      const auto& f = std::get<StorageGain>(family_);
      return f.gamma_s * w - 0.5 * f.eps_reg * w * w;
    }
    if (std::holds_alternative<LosslessGain>(family_)) {
      const auto& f = std::get<LosslessGain>(family_);
      return w - 0.5 * f.eps_reg * w * w;
    }
    if (std::holds_alternative<UniswapGain>(family_)) {
      const auto& f = std::get<UniswapGain>(family_);
      return f.r2 * f.fee * w / (f.r1 + f.fee * w);
    }
    if (std::holds_alternative<BalancerTwoGain>(family_)) {
      const auto& f = std::get<BalancerTwoGain>(family_);
      const double q = f.weight / (1.0 - f.weight);
      return f.r2 * (1.0 - std::pow(f.r1 / (f.r1 + f.fee * w), q));
    }
    if (std::holds_alternative<SqrtGain>(family_)) {
      const auto& f = std::get<SqrtGain>(family_);
      return std::sqrt(f.b + f.g * w) - std::sqrt(f.b);
    }
    return std::get<CustomGain>(family_).h(w);
  }

  void validate_family() {
    if (std::holds_alternative<PowerLineGain>(family_)) {
      const auto& f = std::get<PowerLineGain>(family_);
      if (!(f.alpha > 0.0) || !(f.beta > 0.0)) {
        throw std::invalid_argument("PowerLineGain: alpha, beta must be > 0");
      }
      if (std::abs(f.alpha * f.beta - 4.0) > 1e-12) {
        throw std::invalid_argument("PowerLineGain: alpha * beta must equal 4");
      }
      if (dgain(ub_) < 0.0) {
        throw std::invalid_argument(
            "PowerLineGain: gain not increasing up to ub");
      }
    } else if (std::holds_alternative<StorageGain>(family_)) {
      const auto& f = std::get<StorageGain>(family_);
      if (!(f.gamma_s > 0.0) || f.gamma_s > 1.0 || !(f.eps_reg > 0.0)) {
        throw std::invalid_argument(
            "StorageGain: need gamma_s in (0,1], eps_reg > 0");
      }
      if (ub_ > f.gamma_s / f.eps_reg) {
        throw std::invalid_argument(
            "StorageGain: ub exceeds gamma_s/eps_reg, gain not increasing");
      }
    } else if (std::holds_alternative<LosslessGain>(family_)) {
      const auto& f = std::get<LosslessGain>(family_);
      if (!(f.eps_reg > 0.0)) {
        throw std::invalid_argument("LosslessGain: eps_reg must be > 0");
      }
      if (ub_ > 1.0 / f.eps_reg) {
        throw std::invalid_argument(
            "LosslessGain: ub exceeds 1/eps_reg, gain not increasing");
      }
    } else if (std::holds_alternative<UniswapGain>(family_)) {
      const auto& f = std::get<UniswapGain>(family_);
      if (!(f.r1 > 0.0) || !(f.r2 > 0.0)) {
        throw std::invalid_argument("UniswapGain: reserves must be > 0");
      }
      if (!(f.fee > 0.0) || f.fee > 1.0) {
        throw std::invalid_argument("UniswapGain: fee must be in (0, 1]");
      }
    } else if (std::holds_alternative<BalancerTwoGain>(family_)) {
      const auto& f = std::get<BalancerTwoGain>(family_);
      if (!(f.r1 > 0.0) || !(f.r2 > 0.0)) {
        throw std::invalid_argument("BalancerTwoGain: reserves must be > 0");
      }
      if (!(f.weight > 0.0) || !(f.weight < 1.0)) {
        throw std::invalid_argument("BalancerTwoGain: weight must be in (0,1)");
      }
      if (!(f.fee > 0.0) || f.fee > 1.0) {
        throw std::invalid_argument("BalancerTwoGain: fee must be in (0, 1]");
      }
    } else if (std::holds_alternative<SqrtGain>(family_)) {
      const auto& f = std::get<SqrtGain>(family_);
      if (!(f.b > 0.0) || !(f.g > 0.0)) {
        throw std::invalid_argument("SqrtGain: b, g must be > 0");
      }
    } else {
      if (!std::get<CustomGain>(family_).h) {
        throw std::invalid_argument("CustomGain: gain oracle is required");
      }
    }
  }

  static double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  }

  static double log1pexp(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }

  IncidenceMap map_;
  GainFamily family_;
  double ub_;
};

// Prices apply to the arbitrage maximizer only through their ratio; closed
// forms and caches key on it.
inline double homogeneity_normalize(double eta1, double eta2) {
  if (!(eta2 > 0.0)) {
    throw std::invalid_argument("invalid dual prices: eta2 must be positive");
  }
  return eta1 / eta2;
}

// Zero flow is optimal iff h+(0) <= eta1/eta2 <= h-(0); our edges are
// one-directional so h-(0) = +inf and the upper test is vacuous.
inline bool no_flow_check(const GainEdge& edge, double eta1, double eta2) {
  const double ratio = homogeneity_normalize(eta1, eta2);
  return edge.dgain(0.0) <= ratio;
}

struct ArbitrageResult {
  double w = 0.0;
  std::array<double, 2> flow{0.0, 0.0};  // (-w, h(w))
  double value = 0.0;                    // -eta1 w + eta2 h(w)
};

// Solves max_{0 <= w <= ub} -eta1 w + eta2 h(w). Resolution order: closed
// form when the family has one, then the no-flow and saturation shortcuts,
// then sign bisection on h'(w) = eta1/eta2 with one secant polish step when
// a derivative oracle exists. The returned value is always the exact
// objective at the returned w, including at the clamp points.
inline ArbitrageResult arbitrage_two_node(const GainEdge& edge, double eta1,
                                          double eta2, double tol) {
  if (!(eta2 > 0.0) || eta1 < 0.0) {
    throw std::invalid_argument("invalid dual prices");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("arbitrage_two_node: tol must be positive");
  }
  const double ratio = eta1 / eta2;
  const double ub = edge.ub();

  double w = 0.0;
  if (edge.has_closed_form()) {
    w = edge.closed_form_wstar(ratio);
  } else if (edge.dgain(0.0) <= ratio) {
    w = 0.0;
  } else if (edge.dgain(ub) >= ratio) {
    w = ub;
  } else {
    // h' is decreasing with h'(0) > ratio > h'(ub); bisect on the sign of
    // h'(w) - ratio for ceil(log2(ub/tol)) steps.
    double lo = 0.0;
    double hi = ub;
    const int iters =
        static_cast<int>(std::ceil(std::log2(std::max(ub / tol, 2.0))));
    for (int i = 0; i < iters; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (edge.dgain(mid) > ratio) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    w = 0.5 * (lo + hi);
    if (edge.has_derivative() && hi > lo) {
      // Secant step on h'(w) = ratio across the final bracket, kept inside it.
      const double dlo = edge.dgain(lo);
      const double dhi = edge.dgain(hi);
      if (dlo > dhi) {
        const double ws = lo + (dlo - ratio) * (hi - lo) / (dlo - dhi);
        if (std::isfinite(ws)) w = std::clamp(ws, lo, hi);
      }
    }
  }

  ArbitrageResult result;
  result.w = w;
  const double hw = (w == 0.0) ? 0.0 : edge.gain(w);
  result.flow = {-w, hw};
  result.value = -eta1 * w + eta2 * hw;
  return result;
}

// ---------------------------------------------------------------------------
// General hyperedges: a support-function oracle over an arbitrary compact
// convex allowable-flow set.
// ---------------------------------------------------------------------------

struct SupportResult {
  double value = 0.0;
  std::vector<double> flow;
};

// Axis-aligned box of allowable flows, l <= 0 <= u componentwise.
struct BoxHyperEdge {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct CustomHyperEdge {
  std::function<SupportResult(std::span<const double>)> oracle;
};

class HyperEdge {
 public:
  HyperEdge(IncidenceMap map, BoxHyperEdge box)
      : map_(std::move(map)), kind_(std::move(box)) {
    const auto& b = std::get<BoxHyperEdge>(kind_);
    if (b.lower.size() != map_.dim() || b.upper.size() != map_.dim()) {
      throw std::invalid_argument("BoxHyperEdge: bound dimension mismatch");
    }
    for (std::size_t k = 0; k < b.lower.size(); ++k) {
      if (!(b.lower[k] <= 0.0) || !(b.upper[k] >= 0.0)) {
        throw std::invalid_argument("BoxHyperEdge: bounds must straddle zero");
      }
      if (!std::isfinite(b.lower[k]) || !std::isfinite(b.upper[k])) {
        throw std::invalid_argument("BoxHyperEdge: bounds must be finite");
      }
    }
  }

  HyperEdge(IncidenceMap map, CustomHyperEdge oracle)
      : map_(std::move(map)), kind_(std::move(oracle)) {
    if (!std::get<CustomHyperEdge>(kind_).oracle) {
      throw std::invalid_argument("CustomHyperEdge: oracle is required");
    }
  }

  const IncidenceMap& map() const { return map_; }
  bool is_box() const { return std::holds_alternative<BoxHyperEdge>(kind_); }
  const BoxHyperEdge& box() const { return std::get<BoxHyperEdge>(kind_); }

  SupportResult support(std::span<const double> eta) const {
    if (eta.size() != map_.dim()) {
      throw std::invalid_argument("HyperEdge: price dimension mismatch");
    }
    if (std::holds_alternative<BoxHyperEdge>(kind_)) {
      const auto& b = std::get<BoxHyperEdge>(kind_);
      SupportResult r;
      r.flow.resize(eta.size());
      for (std::size_t k = 0; k < eta.size(); ++k) {
        if (eta[k] > 0.0) {
          r.flow[k] = b.upper[k];
        } else if (eta[k] < 0.0) {
          r.flow[k] = b.lower[k];
        } else {
          r.flow[k] = 0.0;
        }
        r.value += eta[k] * r.flow[k];
      }
      return r;
    }
    SupportResult r = std::get<CustomHyperEdge>(kind_).oracle(eta);
    if (!std::isfinite(r.value)) {
      throw std::runtime_error("unbounded edge");
    }
    if (r.flow.size() != map_.dim()) {
      throw std::runtime_error("HyperEdge: oracle flow dimension mismatch");
    }
    return r;
  }

 private:
  IncidenceMap map_;
  std::variant<BoxHyperEdge, CustomHyperEdge> kind_;
};

using Edge = std::variant<GainEdge, HyperEdge>;

inline const IncidenceMap& edge_map(const Edge& edge) {
  if (std::holds_alternative<GainEdge>(edge)) {
    return std::get<GainEdge>(edge).map();
  }
  return std::get<HyperEdge>(edge).map();
}

inline std::size_t edge_dim(const Edge& edge) { return edge_map(edge).dim(); }

// f_i(eta) = sup { eta'x : x allowable } with an attaining flow. Gain edges
// route through the scalar arbitrage problem.
inline SupportResult edge_support(const Edge& edge, std::span<const double> eta,
                                  double tol) {
  if (std::holds_alternative<GainEdge>(edge)) {
    const auto& ge = std::get<GainEdge>(edge);
    const ArbitrageResult a = arbitrage_two_node(ge, eta[0], eta[1], tol);
    return SupportResult{a.value, {a.flow[0], a.flow[1]}};
  }
  return std::get<HyperEdge>(edge).support(eta);
}

}  // namespace convexflows
