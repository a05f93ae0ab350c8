#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "convexflows/problem.hpp"
#include "convexflows/solver.hpp"

namespace convexflows {

struct PrimalPoint {
  std::vector<double> y_hat;
  FlowVector flows;
};

// Approximate primal point from a dual iterate: per-edge arbitrage
// maximizers scattered into y_hat = sum_i A_i x~_i, feasible by construction.
inline PrimalPoint recover_primal(const Problem& problem,
                                  const DualIterate& iterate,
                                  double subproblem_tol = 1e-10) {
  PrimalPoint out;
  out.flows.resize(problem.num_edges());
  for (std::size_t i = 0; i < problem.num_edges(); ++i) {
    const Edge& edge = problem.edges[i];
    std::vector<double> eta = gather_local(iterate.nu, edge_map(edge));
    if (iterate.xi) {
      for (std::size_t k = 0; k < eta.size(); ++k) eta[k] += (*iterate.xi)[i][k];
    }
    out.flows[i] = edge_support(edge, eta, subproblem_tol).flow;
  }
  out.y_hat = net_flow(out.flows, problem);
  return out;
}

inline PrimalPoint recover_primal(const Problem& problem,
                                  std::span<const double> nu,
                                  double subproblem_tol = 1e-10) {
  DualIterate it;
  it.nu.assign(nu.begin(), nu.end());
  return recover_primal(problem, it, subproblem_tol);
}

struct GapReport {
  double dual_value = 0.0;
  double primal_value = 0.0;  // U(y_hat) + sum_i V_i(x~_i); -inf allowed
  double rel_gap = 0.0;       // (dual - primal)/max(1, |dual|); +inf allowed
};

inline GapReport duality_gap(const Problem& problem, std::span<const double> nu,
                             double subproblem_tol = 1e-10) {
  const DualEval e = dual_eval(problem, nu, subproblem_tol);
  GapReport r;
  r.dual_value = e.g;
  r.primal_value = primal_objective_feastol(problem, e.flows, e.y_hat);
  r.rel_gap = detail::relative_gap(e.g, r.primal_value);
  return r;
}

// KKT-style certificate for a solver result. All residuals are nonnegative
// by construction:
//  - support violation: f_i(eta_i) - eta_i'x~_i, the normal-cone membership
//    residual of the stored flow at the stored prices;
//  - stationarity violation (extended mode): the projected-gradient residual
//    of each xi block, zero exactly when xi satisfies the complementarity
//    conditions against the stored flows.
struct OptimalityReport {
  double max_support_violation = 0.0;
  double max_stationarity_violation = 0.0;
  double gap = 0.0;
  double primal_residual = 0.0;

  bool pass(double tol) const {
    return max_support_violation <= tol && max_stationarity_violation <= tol &&
           gap <= tol && primal_residual <= tol;
  }
};

inline OptimalityReport check_optimality(const Problem& problem,
                                         const SolveResult& result,
                                         double subproblem_tol = 1e-10) {
  OptimalityReport report;
  const bool extended = !result.xi.empty();

  double dual = ubar(problem.objective, result.nu);
  for (std::size_t i = 0; i < problem.num_edges(); ++i) {
    const Edge& edge = problem.edges[i];
    std::vector<double> eta = gather_local(result.nu, edge_map(edge));
    if (extended) {
      for (std::size_t k = 0; k < eta.size(); ++k) eta[k] += result.xi[i][k];
      dual += vbar(problem.edge_objective(i), result.xi[i]);
    }
    const SupportResult s = edge_support(edge, eta, subproblem_tol);
    dual += s.value;
    double along = 0.0;
    for (std::size_t k = 0; k < eta.size(); ++k) {
      along += eta[k] * result.flows[i][k];
    }
    report.max_support_violation =
        std::max(report.max_support_violation, s.value - along);

    if (extended && !is_zero_objective(problem.edge_objective(i))) {
      const std::vector<double> xstar =
          vbar_maximizer(problem.edge_objective(i), result.xi[i]);
      double resid = 0.0;
      for (std::size_t k = 0; k < eta.size(); ++k) {
        const double grad_k = result.flows[i][k] - xstar[k];
        const double projected = std::max(result.xi[i][k] - grad_k, 0.0);
        resid = std::max(resid, std::abs(result.xi[i][k] - projected));
      }
      report.max_stationarity_violation =
          std::max(report.max_stationarity_violation, resid);
    }
  }

  const std::vector<double> y_hat = net_flow(result.flows, problem);
  const double primal = primal_objective_feastol(problem, result.flows, y_hat);
  report.gap = detail::relative_gap(dual, primal);

  const std::vector<double> y_star =
      ubar_maximizer(problem.objective, result.nu);
  std::vector<double> grad_nu(y_hat.size());
  for (std::size_t j = 0; j < y_hat.size(); ++j) {
    grad_nu[j] = y_hat[j] - y_star[j];
  }
  const std::vector<double> lb = conjugate_lower_bounds(problem.objective);
  report.primal_residual =
      detail::projected_nu_residual(result.nu, grad_nu, lb) /
      std::max(1.0, detail::linf(y_hat));
  return report;
}

// Central finite differences of a scalar field, the test-side gradient
// oracle. Throws naming the offending coordinate if the field is infinite at
// a probe point.
inline std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& field,
    std::span<const double> point, double step) {
  std::vector<double> probe(point.begin(), point.end());
  std::vector<double> grad(point.size());
  for (std::size_t j = 0; j < point.size(); ++j) {
    probe[j] = point[j] + step;
    const double up = field(probe);
    probe[j] = point[j] - step;
    const double down = field(probe);
    probe[j] = point[j];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("finite_diff_grad: field not finite near coordinate " +
                              std::to_string(j));
    }
    grad[j] = (up - down) / (2.0 * step);
  }
  return grad;
}

struct GridOracleResult {
  double value = -kInf;
  FlowVector flows;
};

namespace detail {

// Evaluates the primal objective of the saturating flows x_i = (-w_i, h(w_i)).
inline double grid_objective(const Problem& problem,
                             std::span<const GainEdge* const> edges,
                             std::span<const double> w,
                             std::span<const double> hw,
                             std::vector<double>& y_scratch) {
  std::fill(y_scratch.begin(), y_scratch.end(), 0.0);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    y_scratch[edges[i]->source()] -= w[i];
    y_scratch[edges[i]->sink()] += hw[i];
  }
  double val = u_eval(problem.objective, y_scratch);
  if (problem.edge_objectives && std::isfinite(val)) {
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const double x[2] = {-w[i], hw[i]};
      val += v_eval(problem.edge_objective(i), std::span<const double>(x, 2));
    }
  }
  return val;
}

}  // namespace detail

// Exhaustive grid search over the edge inputs of a tiny instance; the
// independent ground truth used by the end-to-end tests. The coarse pass
// grids w_i in [0, ub_i] at step resolution * ub_i, then one refinement pass
// re-grids a one-coarse-cell window around the incumbent at a step 100x
// finer. Feasible evaluations only, so the value is a primal lower bound.
inline GridOracleResult grid_oracle(const Problem& problem, double resolution) {
  const std::size_t m = problem.num_edges();
  if (m > 3) throw std::invalid_argument("grid_oracle: oracle scale exceeded");
  if (!(resolution > 0.0) || resolution >= 1.0) {
    throw std::invalid_argument("grid_oracle: resolution must be in (0, 1)");
  }
  std::vector<const GainEdge*> edges;
  for (const Edge& e : problem.edges) {
    if (!std::holds_alternative<GainEdge>(e)) {
      throw std::invalid_argument("grid_oracle: only two-node gain edges");
    }
    edges.push_back(&std::get<GainEdge>(e));
  }

  GridOracleResult best;
  std::vector<double> y_scratch(problem.num_nodes);
  std::vector<double> w(m, 0.0), hw(m, 0.0);
  if (m == 0) {
    best.value = u_eval(problem.objective, y_scratch);
    return best;
  }

  // One pass over the product of per-edge sample lists; lists are
  // precomputed so each combination costs O(m + n).
  auto sweep = [&](const std::vector<std::vector<double>>& samples) {
    std::vector<std::vector<double>> gains(m);
    for (std::size_t i = 0; i < m; ++i) {
      gains[i].resize(samples[i].size());
      for (std::size_t k = 0; k < samples[i].size(); ++k) {
        gains[i][k] = edges[i]->gain(samples[i][k]);
      }
    }
    std::vector<std::size_t> idx(m, 0);
    for (;;) {
      for (std::size_t i = 0; i < m; ++i) {
        w[i] = samples[i][idx[i]];
        hw[i] = gains[i][idx[i]];
      }
      const double val =
          detail::grid_objective(problem, edges, w, hw, y_scratch);
      if (val > best.value) {
        best.value = val;
        best.flows.assign(m, {});
        for (std::size_t i = 0; i < m; ++i) best.flows[i] = {-w[i], hw[i]};
      }
      std::size_t carry = 0;
      while (carry < m && ++idx[carry] == samples[carry].size()) {
        idx[carry] = 0;
        ++carry;
      }
      if (carry == m) break;
    }
  };

  std::vector<std::vector<double>> coarse(m);
  const std::size_t coarse_steps =
      static_cast<std::size_t>(std::llround(1.0 / resolution));
  for (std::size_t i = 0; i < m; ++i) {
    const double ub = edges[i]->ub();
    coarse[i].resize(coarse_steps + 1);
    for (std::size_t k = 0; k <= coarse_steps; ++k) {
      coarse[i][k] = ub * static_cast<double>(k) / coarse_steps;
    }
  }
  sweep(coarse);

  if (best.flows.empty()) return best;  // objective infeasible everywhere

  std::vector<std::vector<double>> fine(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double ub = edges[i]->ub();
    const double coarse_step = ub / coarse_steps;
    const double center = -best.flows[i][0];
    const double lo = std::max(0.0, center - coarse_step);
    const double hi = std::min(ub, center + coarse_step);
    const double fine_step = coarse_step / 100.0;
    const std::size_t count =
        static_cast<std::size_t>(std::floor((hi - lo) / fine_step)) + 1;
    fine[i].resize(count);
    for (std::size_t k = 0; k < count; ++k) {
      fine[i][k] = std::min(lo + fine_step * static_cast<double>(k), hi);
    }
  }
  sweep(fine);
  return best;
}

}  // namespace convexflows
