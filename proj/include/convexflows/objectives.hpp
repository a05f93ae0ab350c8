#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace convexflows {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Network objective atoms. Each atom supplies four things: the utility U, the
// conjugate-like subproblem value Ubar(nu) = sup_y (U(y) - nu'y), the vector
// attaining that supremum, and a strictly feasible dual start point. Infinite
// values are ordinary extended reals, never exceptions: U(y) = -inf marks an
// unacceptable flow, Ubar(nu) = +inf marks nu outside the conjugate domain.
// ---------------------------------------------------------------------------

// U(y) = c'y - I(y >= 0). The maximizer is pinned to zero everywhere on the
// conjugate domain, including its boundary faces: any value ties there, and
// zero keeps primal-side diagnostics meaningful (the most valuable trade that
// on net tenders nothing).
struct LinearAtom {
  std::vector<double> prices;

  LinearAtom() = default;

  explicit LinearAtom(std::vector<double> c) : prices(std::move(c)) {
    for (double cj : prices) {
      if (!(cj >= 0.0)) {
        throw std::invalid_argument("LinearAtom: prices must be nonnegative");
      }
    }
  }
};

// U(y) = -sum_j (kappa_j/2) * max(d_j - y_j, 0)^2: quadratic cost of serving
// residual demand, free disposal above it.
struct NonpositiveQuadraticAtom {
  std::vector<double> demand;
  std::vector<double> kappa;

  NonpositiveQuadraticAtom(std::vector<double> d, std::vector<double> k)
      : demand(std::move(d)), kappa(std::move(k)) {
    if (demand.size() != kappa.size()) {
      throw std::invalid_argument(
          "NonpositiveQuadraticAtom: demand/kappa size mismatch");
    }
    for (double kj : kappa) {
      if (!(kj > 0.0)) {
        throw std::invalid_argument(
            "NonpositiveQuadraticAtom: kappa must be strictly positive");
      }
    }
  }
};

// Budget-weighted log utility over buyer nodes plus a small quadratic
// regularizer on good nodes:
//   U(y) = sum_i b_i log(y_i) - (eps/2) sum_g y_g^2 - I(y_goods >= -1).
// Buyers occupy coordinates [0, num_buyers), goods the rest. The regularizer
// keeps the good-side conjugate finite and differentiable for positive
// prices.
struct FisherBudgetAtom {
  std::vector<double> budgets;
  std::size_t num_buyers = 0;
  std::size_t num_goods = 0;
  double eps_good = 1e-8;

  FisherBudgetAtom(std::vector<double> b, std::size_t nb, std::size_t ng,
                   double eps = 1e-8)
      : budgets(std::move(b)), num_buyers(nb), num_goods(ng), eps_good(eps) {
    if (budgets.size() != num_buyers) {
      throw std::invalid_argument("FisherBudgetAtom: budgets size != buyers");
    }
    for (double bi : budgets) {
      if (!(bi > 0.0)) {
        throw std::invalid_argument(
            "FisherBudgetAtom: budgets must be strictly positive");
      }
    }
    if (!(eps_good > 0.0)) {
      throw std::invalid_argument("FisherBudgetAtom: eps_good must be > 0");
    }
  }
};

// User-supplied objective. The solver needs Ubar and its gradient directly
// (the maximizer is -grad Ubar); a generic Newton fallback on
// grad U(y) = nu is deliberately not provided.
struct CustomAtom {
  std::size_t dim = 0;
  std::function<double(std::span<const double>)> u;
  std::function<double(std::span<const double>)> ubar;
  std::function<std::vector<double>(std::span<const double>)> ubar_grad;
  std::vector<double> start;
};

using ObjectiveAtom = std::variant<LinearAtom, NonpositiveQuadraticAtom,
                                   FisherBudgetAtom, CustomAtom>;

inline std::size_t atom_dim(const ObjectiveAtom& atom) {
  struct {
    std::size_t operator()(const LinearAtom& a) const {
      return a.prices.size();
    }
    std::size_t operator()(const NonpositiveQuadraticAtom& a) const {
      return a.demand.size();
    }
    std::size_t operator()(const FisherBudgetAtom& a) const {
      return a.num_buyers + a.num_goods;
    }
    std::size_t operator()(const CustomAtom& a) const { return a.dim; }
  } v;
  return std::visit(v, atom);
}

inline double u_eval(const ObjectiveAtom& atom, std::span<const double> y) {
  if (std::holds_alternative<LinearAtom>(atom)) {
    const auto& a = std::get<LinearAtom>(atom);
    double val = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] < 0.0) return -kInf;
      val += a.prices[j] * y[j];
    }
    return val;
  }
  if (std::holds_alternative<NonpositiveQuadraticAtom>(atom)) {
    const auto& a = std::get<NonpositiveQuadraticAtom>(atom);
    double val = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double r = a.demand[j] - y[j];
      if (r > 0.0) val -= 0.5 * a.kappa[j] * r * r;
    }
    return val;
  }
  if (std::holds_alternative<FisherBudgetAtom>(atom)) {
    const auto& a = std::get<FisherBudgetAtom>(atom);
    double val = 0.0;
    for (std::size_t i = 0; i < a.num_buyers; ++i) {
      if (y[i] <= 0.0) return -kInf;
      val += a.budgets[i] * std::log(y[i]);
    }
    for (std::size_t g = 0; g < a.num_goods; ++g) {
      const double yg = y[a.num_buyers + g];
      if (yg < -1.0) return -kInf;
      val -= 0.5 * a.eps_good * yg * yg;
    }
    return val;
  }
  return std::get<CustomAtom>(atom).u(y);
}

inline double ubar(const ObjectiveAtom& atom, std::span<const double> nu) {
  if (std::holds_alternative<LinearAtom>(atom)) {
    const auto& a = std::get<LinearAtom>(atom);
    for (std::size_t j = 0; j < nu.size(); ++j) {
      if (nu[j] < a.prices[j]) return kInf;
    }
    return 0.0;
  }
  if (std::holds_alternative<NonpositiveQuadraticAtom>(atom)) {
    const auto& a = std::get<NonpositiveQuadraticAtom>(atom);
    double val = 0.0;
    for (std::size_t j = 0; j < nu.size(); ++j) {
      if (nu[j] < 0.0) return kInf;
      val += 0.5 * nu[j] * nu[j] / a.kappa[j] - a.demand[j] * nu[j];
    }
    return val;
  }
  if (std::holds_alternative<FisherBudgetAtom>(atom)) {
    const auto& a = std::get<FisherBudgetAtom>(atom);
    double val = 0.0;
    for (std::size_t i = 0; i < a.num_buyers; ++i) {
      if (nu[i] <= 0.0) return kInf;
      val += a.budgets[i] * (std::log(a.budgets[i] / nu[i]) - 1.0);
    }
    for (std::size_t g = 0; g < a.num_goods; ++g) {
      const double ng = nu[a.num_buyers + g];
      val += (ng <= a.eps_good) ? 0.5 * ng * ng / a.eps_good
                                : ng - 0.5 * a.eps_good;
    }
    return val;
  }
  return std::get<CustomAtom>(atom).ubar(nu);
}

// The y attaining Ubar(nu). Callers must keep nu strictly inside the
// conjugate domain (the solver's line search does); where the supremum is
// unattained or non-unique this throws.
inline std::vector<double> ubar_maximizer(const ObjectiveAtom& atom,
                                          std::span<const double> nu) {
  if (std::holds_alternative<LinearAtom>(atom)) {
    const auto& a = std::get<LinearAtom>(atom);
    for (std::size_t j = 0; j < nu.size(); ++j) {
      if (nu[j] < a.prices[j]) {
        throw std::domain_error("dual iterate on conjugate boundary");
      }
    }
    return std::vector<double>(nu.size(), 0.0);
  }
  if (std::holds_alternative<NonpositiveQuadraticAtom>(atom)) {
    const auto& a = std::get<NonpositiveQuadraticAtom>(atom);
    std::vector<double> y(nu.size());
    for (std::size_t j = 0; j < nu.size(); ++j) {
      if (nu[j] <= 0.0) {
        throw std::domain_error("dual iterate on conjugate boundary");
      }
      y[j] = a.demand[j] - nu[j] / a.kappa[j];
    }
    return y;
  }
  if (std::holds_alternative<FisherBudgetAtom>(atom)) {
    const auto& a = std::get<FisherBudgetAtom>(atom);
    std::vector<double> y(nu.size());
    for (std::size_t i = 0; i < a.num_buyers; ++i) {
      if (nu[i] <= 0.0) {
        throw std::domain_error("dual iterate on conjugate boundary");
      }
      y[i] = a.budgets[i] / nu[i];
    }
    for (std::size_t g = 0; g < a.num_goods; ++g) {
      y[a.num_buyers + g] =
          std::max(-1.0, -nu[a.num_buyers + g] / a.eps_good);
    }
    return y;
  }
  const auto& a = std::get<CustomAtom>(atom);
  std::vector<double> grad = a.ubar_grad(nu);
  for (double& gj : grad) gj = -gj;
  return grad;
}

// grad Ubar(nu) = -y*(nu) under this library's sign convention; with it the
// dual gradient -y* + sum_i A_i x~_i* vanishes exactly at primal feasibility.
inline std::vector<double> ubar_grad(const ObjectiveAtom& atom,
                                     std::span<const double> nu) {
  if (std::holds_alternative<CustomAtom>(atom)) {
    return std::get<CustomAtom>(atom).ubar_grad(nu);
  }
  std::vector<double> g = ubar_maximizer(atom, nu);
  for (double& gj : g) gj = -gj;
  return g;
}

// Per-coordinate lower bounds of the conjugate domain, all >= 0. The solvers
// cap steps against these exactly the way the positivity bound is applied;
// for the linear atom the domain is the price-shifted orthant {nu >= c} and
// its boundary is admissible (Ubar is finite there and the maximizer
// tie-break applies).
inline std::vector<double> conjugate_lower_bounds(const ObjectiveAtom& atom) {
  if (std::holds_alternative<LinearAtom>(atom)) {
    return std::get<LinearAtom>(atom).prices;
  }
  return std::vector<double>(atom_dim(atom), 0.0);
}

// A strictly positive start point strictly inside dom Ubar.
inline std::vector<double> initial_dual(const ObjectiveAtom& atom) {
  if (std::holds_alternative<LinearAtom>(atom)) {
    const auto& a = std::get<LinearAtom>(atom);
    std::vector<double> nu(a.prices.size());
    for (std::size_t j = 0; j < nu.size(); ++j) nu[j] = a.prices[j] + 1.0;
    return nu;
  }
  if (std::holds_alternative<NonpositiveQuadraticAtom>(atom)) {
    const auto& a = std::get<NonpositiveQuadraticAtom>(atom);
    std::vector<double> nu(a.demand.size());
    for (std::size_t j = 0; j < nu.size(); ++j) {
      nu[j] = std::max(a.demand[j] * a.kappa[j] / 2.0, 1.0);
    }
    return nu;
  }
  if (std::holds_alternative<FisherBudgetAtom>(atom)) {
    const auto& a = std::get<FisherBudgetAtom>(atom);
    return std::vector<double>(a.num_buyers + a.num_goods, 1.0);
  }
  const auto& a = std::get<CustomAtom>(atom);
  if (a.start.size() != a.dim) {
    throw std::invalid_argument("CustomAtom: start point has wrong dimension");
  }
  for (double s : a.start) {
    if (!(s > 0.0)) {
      throw std::invalid_argument(
          "CustomAtom: start point must be strictly positive");
    }
  }
  if (!std::isfinite(a.ubar(a.start))) {
    throw std::invalid_argument(
        "CustomAtom: start point outside the conjugate domain");
  }
  return a.start;
}

// ---------------------------------------------------------------------------
// Edge objective atoms: Vbar(xi) = sup_x (V(x) - xi'x) and its maximizer.
// ---------------------------------------------------------------------------

// V identically zero. Vbar is the indicator of {0}: the reduced solver never
// evaluates it away from xi = 0.
struct ZeroEdgeObjective {};

// V(x) = -(1/2) ||x_-||^2, the per-edge penalty on tendered flow.
// Vbar(xi) = (1/2) ||xi||^2 on xi >= 0, attained at x = -xi.
struct NegPartQuadraticEdgeObjective {};

struct CustomEdgeObjective {
  std::function<double(std::span<const double>)> vbar;
  std::function<std::vector<double>(std::span<const double>)> maximizer;
  // Optional primal-side V for gap reporting; treated as 0 when absent.
  std::function<double(std::span<const double>)> v;
};

using EdgeObjectiveAtom = std::variant<ZeroEdgeObjective,
                                       NegPartQuadraticEdgeObjective,
                                       CustomEdgeObjective>;

inline bool is_zero_objective(const EdgeObjectiveAtom& atom) {
  return std::holds_alternative<ZeroEdgeObjective>(atom);
}

inline double vbar(const EdgeObjectiveAtom& atom, std::span<const double> xi) {
  if (std::holds_alternative<ZeroEdgeObjective>(atom)) {
    for (double x : xi) {
      if (x != 0.0) return kInf;
    }
    return 0.0;
  }
  if (std::holds_alternative<NegPartQuadraticEdgeObjective>(atom)) {
    double val = 0.0;
    for (double x : xi) {
      if (x < 0.0) return kInf;
      val += 0.5 * x * x;
    }
    return val;
  }
  return std::get<CustomEdgeObjective>(atom).vbar(xi);
}

inline std::vector<double> vbar_maximizer(const EdgeObjectiveAtom& atom,
                                          std::span<const double> xi) {
  if (std::holds_alternative<ZeroEdgeObjective>(atom)) {
    for (double x : xi) {
      if (x != 0.0) {
        throw std::domain_error(
            "vbar_maximizer: zero edge objective evaluated at xi != 0");
      }
    }
    return std::vector<double>(xi.size(), 0.0);
  }
  if (std::holds_alternative<NegPartQuadraticEdgeObjective>(atom)) {
    std::vector<double> x(xi.size());
    for (std::size_t k = 0; k < xi.size(); ++k) {
      if (xi[k] < 0.0) {
        throw std::domain_error(
            "vbar_maximizer: xi outside the conjugate domain");
      }
      x[k] = -xi[k];
    }
    return x;
  }
  return std::get<CustomEdgeObjective>(atom).maximizer(xi);
}

// Primal V(x), used when reporting the objective of a recovered point.
inline double v_eval(const EdgeObjectiveAtom& atom, std::span<const double> x) {
  if (std::holds_alternative<ZeroEdgeObjective>(atom)) return 0.0;
  if (std::holds_alternative<NegPartQuadraticEdgeObjective>(atom)) {
    double val = 0.0;
    for (double xk : x) {
      if (xk < 0.0) val -= 0.5 * xk * xk;
    }
    return val;
  }
  const auto& a = std::get<CustomEdgeObjective>(atom);
  return a.v ? a.v(x) : 0.0;
}

}  // namespace convexflows
