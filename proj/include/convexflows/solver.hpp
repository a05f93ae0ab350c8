#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "convexflows/problem.hpp"

namespace convexflows {

enum class SolveStatus { kOptimal, kMaxIter, kLineSearchFailure, kInvalidProblem };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kMaxIter: return "max_iter";
    case SolveStatus::kLineSearchFailure: return "line_search_failure";
    case SolveStatus::kInvalidProblem: return "invalid_problem";
  }
  return "unknown";
}

enum class SolveMode { kAuto, kReduced, kExtended };

struct SolverConfig {
  SolveMode mode = SolveMode::kAuto;
  double tol_gap = 1e-7;    // relative duality gap
  double tol_grad = 1e-8;   // relative gradient / projected gradient norm
  int max_iter = 1000;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  double boundary_fraction = 0.995;  // step cap keeping nu strictly positive
  int memory = 10;                   // nonmonotone window for SPG
  int threads = 1;
  double subproblem_tol = 1e-10;
  double nu_floor = 1e-12;  // extended-mode projection floor on the nu block
};

struct TraceRow {
  int iter = 0;
  double g = 0.0;
  double grad_inf = 0.0;
  double rel_gap = 0.0;
  double primal_resid = 0.0;
  double step = 0.0;
  double time_s = 0.0;
};

// The dual variable: nu always, plus per-edge xi = eta_i - A_i'nu in
// extended mode (eta_i is reconstructed as xi_i + gather(nu)).
struct DualIterate {
  std::vector<double> nu;
  std::optional<FlowVector> xi;
};

struct SolveResult {
  SolveStatus status = SolveStatus::kInvalidProblem;
  double dual_value = 0.0;
  double primal_value = 0.0;
  double rel_gap = 0.0;
  double primal_residual = 0.0;
  std::vector<double> nu;
  FlowVector xi;  // extended mode only; one vector per edge (zero edges pinned)
  std::vector<double> y_hat;
  FlowVector flows;
  int iterations = 0;
  std::vector<TraceRow> trace;
  double wall_time_s = 0.0;
  std::string message;
};

namespace detail {

inline double linf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Runs fn(i) for i in [0, m), split into contiguous blocks across the
// requested worker count. Workers fill disjoint slots; callers reduce in
// edge-index order afterwards, so results do not depend on the thread count.
template <class Fn>
void parallel_edges(std::size_t m, int threads, Fn&& fn) {
  const std::size_t nworkers =
      std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(m, 1));
  if (nworkers <= 1 || m == 0) {
    for (std::size_t i = 0; i < m; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nworkers);
  const std::size_t chunk = (m + nworkers - 1) / nworkers;
  for (std::size_t w = 1; w < nworkers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(m, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi, w] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  try {
    for (std::size_t i = 0; i < std::min(chunk, m); ++i) fn(i);
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

// Result of one dual evaluation. When `finite` is false (the iterate left
// dom Ubar during a line-search probe) only `g` is meaningful.
struct DualEval {
  bool finite = false;
  double g = kInf;
  std::vector<double> grad;       // over nu in reduced mode
  FlowVector xi_grad;             // per-edge xi blocks, extended mode only
  std::vector<double> y_star;     // Ubar maximizer
  std::vector<double> y_hat;      // sum_i A_i x~_i*
  FlowVector flows;               // per-edge support maximizers
  std::vector<double> edge_values;
};

namespace detail {

// Shared evaluation core. In reduced mode xi is null and eta_i = A_i'nu;
// in extended mode eta_i = xi_i + A_i'nu and the vbar terms are added. The
// per-edge sweep is parallel; all reductions run sequentially in edge-index
// order so the result is bit-identical for any worker count.
inline DualEval eval_dual(const Problem& problem, std::span<const double> nu,
                          const FlowVector* xi, double subproblem_tol,
                          int threads) {
  DualEval out;
  const double ubar_val = ubar(problem.objective, nu);
  if (!std::isfinite(ubar_val)) {
    out.g = kInf;
    return out;
  }

  const std::size_t m = problem.num_edges();
  out.flows.resize(m);
  out.edge_values.assign(m, 0.0);
  std::vector<double> vbar_values;
  if (xi) vbar_values.assign(m, 0.0);

  detail::parallel_edges(m, threads, [&](std::size_t i) {
    const Edge& edge = problem.edges[i];
    std::vector<double> eta = gather_local(nu, edge_map(edge));
    if (xi) {
      const auto& xi_i = (*xi)[i];
      for (std::size_t k = 0; k < eta.size(); ++k) eta[k] += xi_i[k];
      vbar_values[i] = vbar(problem.edge_objective(i), (*xi)[i]);
    }
    SupportResult s = edge_support(edge, eta, subproblem_tol);
    out.edge_values[i] = s.value;
    out.flows[i] = std::move(s.flow);
  });

  double g = ubar_val;
  for (std::size_t i = 0; i < m; ++i) {
    g += out.edge_values[i];
    if (xi) g += vbar_values[i];
  }
  if (!std::isfinite(g)) {
    out.g = kInf;
    return out;
  }

  out.finite = true;
  out.g = g;
  out.y_star = ubar_maximizer(problem.objective, nu);
  out.y_hat.assign(problem.num_nodes, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    scatter_accumulate(out.flows[i], edge_map(problem.edges[i]), out.y_hat);
  }
  // grad over nu: -y* + sum_i A_i x~_i* = y_hat - y*.
  out.grad.resize(problem.num_nodes);
  for (std::size_t j = 0; j < problem.num_nodes; ++j) {
    out.grad[j] = out.y_hat[j] - out.y_star[j];
  }
  if (xi) {
    out.xi_grad.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      if (is_zero_objective(problem.edge_objective(i))) {
        out.xi_grad[i].assign(edge_dim(problem.edges[i]), 0.0);
        continue;
      }
      // d/dxi [vbar(xi) + f(xi + A'nu)] = -x*(xi) + x~*.
      std::vector<double> xstar =
          vbar_maximizer(problem.edge_objective(i), (*xi)[i]);
      std::vector<double> gi(xstar.size());
      for (std::size_t k = 0; k < gi.size(); ++k) {
        gi[k] = out.flows[i][k] - xstar[k];
      }
      out.xi_grad[i] = std::move(gi);
    }
  }
  return out;
}

}  // namespace detail

// Dual function and gradient at nu (reduced form, eta_i = A_i'nu). Throws
// when nu is outside dom Ubar: the solver's line search is responsible for
// never letting an accepted iterate leave the domain.
inline DualEval dual_eval(const Problem& problem, std::span<const double> nu,
                          double subproblem_tol = 1e-10, int threads = 1) {
  DualEval e = detail::eval_dual(problem, nu, nullptr, subproblem_tol, threads);
  if (!e.finite) throw std::domain_error("iterate left dual domain");
  return e;
}

// Dual function and gradient over the transformed variable (nu, xi).
inline DualEval dual_eval_extended(const Problem& problem,
                                   const DualIterate& iterate,
                                   double subproblem_tol = 1e-10,
                                   int threads = 1) {
  static const FlowVector kEmpty;
  const FlowVector* xi = iterate.xi ? &*iterate.xi : &kEmpty;
  if (!iterate.xi) {
    throw std::invalid_argument("dual_eval_extended: iterate carries no xi");
  }
  DualEval e = detail::eval_dual(problem, iterate.nu, xi, subproblem_tol,
                                 threads);
  if (!e.finite) throw std::domain_error("iterate left dual domain");
  return e;
}

// ---------------------------------------------------------------------------
// Weak-Wolfe bracketing line search (Lewis-Overton style): doubling until the
// sufficient-decrease test fails or the curvature test passes, then
// bisection. Infinite trial values count as sufficient-decrease failures,
// which is how iterates are kept inside dom Ubar without explicit
// constraints. A trial pinned at t_max that satisfies sufficient decrease is
// accepted even if the curvature test still fails there (the step was capped
// for positivity, not by the search itself).
// ---------------------------------------------------------------------------

struct RayEval {
  double g = kInf;
  double slope = 0.0;
};

struct LineSearchOutcome {
  bool success = false;
  double t = 0.0;
};

template <class Phi>
LineSearchOutcome line_search_weak_wolfe(Phi&& phi, double g0, double slope0,
                                         double t_max, double c1, double c2,
                                         int max_steps = 60) {
  if (!(slope0 < 0.0)) return {false, 0.0};
  if (!(t_max > 0.0)) return {false, 0.0};

  double lo = 0.0;
  double hi = kInf;
  double t = std::min(1.0, t_max);
  for (int step = 0; step < max_steps; ++step) {
    const RayEval e = phi(t);
    if (!std::isfinite(e.g) || e.g > g0 + c1 * t * slope0) {
      hi = t;
    } else if (e.slope < c2 * slope0) {
      lo = t;
      if (t >= t_max) return {true, t};  // capped; accept the decrease
    } else {
      return {true, t};
    }
    t = std::isfinite(hi) ? 0.5 * (lo + hi) : std::min(2.0 * t, t_max);
  }
  return {false, 0.0};
}

namespace detail {

inline double relative_gap(double g, double primal) {
  if (!std::isfinite(primal)) return kInf;
  return (g - primal) / std::max(1.0, std::abs(g));
}

// KKT residual of the net-flow block: the inf-norm of nu - P(nu - grad_nu)
// with P flooring each coordinate at its conjugate-domain bound. On interior
// optima this equals the raw net-flow mismatch ||y* - y_hat||_inf; on
// boundary-supported optima (linear utilities) the clamped coordinates carry
// complementarity instead of a vanishing gradient.
inline double projected_nu_residual(std::span<const double> nu,
                                    std::span<const double> grad_nu,
                                    std::span<const double> lb) {
  double norm = 0.0;
  for (std::size_t j = 0; j < nu.size(); ++j) {
    const double stepped = std::max(nu[j] - grad_nu[j], lb[j]);
    norm = std::max(norm, std::abs(stepped - nu[j]));
  }
  return norm;
}

struct Metrics {
  double grad_inf = 0.0;
  double rel_grad = 0.0;
  double rel_gap = 0.0;
  double primal_resid = 0.0;
  double primal_value = 0.0;
};

inline Metrics metrics_of(const Problem& problem, const DualEval& e,
                          double grad_inf, double nu_residual) {
  Metrics m;
  m.grad_inf = grad_inf;
  m.rel_grad = grad_inf / std::max(1.0, std::abs(e.g));
  m.primal_value = primal_objective_feastol(problem, e.flows, e.y_hat);
  m.rel_gap = relative_gap(e.g, m.primal_value);
  m.primal_resid = nu_residual / std::max(1.0, linf(e.y_hat));
  return m;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Dense BFGS inverse-Hessian update with a curvature skip that keeps H
// positive definite near nonsmooth points.
class BfgsMatrix {
 public:
  explicit BfgsMatrix(std::size_t n) : n_(n) { reset(); }

  void reset() {
    h_.assign(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) h_[i * n_ + i] = 1.0;
    fresh_ = true;
  }

  bool fresh() const { return fresh_; }

  // Detaches one coordinate from the model (identity row/column) while
  // preserving the curvature accumulated on the rest. Used when the active
  // set changes so the free-subspace model survives a coordinate pinning or
  // releasing.
  void reinit_coordinate(std::size_t j) {
    for (std::size_t k = 0; k < n_; ++k) {
      h_[j * n_ + k] = 0.0;
      h_[k * n_ + j] = 0.0;
    }
    h_[j * n_ + j] = 1.0;
  }

  void apply_neg(std::span<const double> grad, std::span<double> p) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      const double* row = &h_[i * n_];
      for (std::size_t j = 0; j < n_; ++j) s += row[j] * grad[j];
      p[i] = -s;
    }
  }

  void update(std::span<const double> s, std::span<const double> y) {
    const double sy = dot(s, y);
    const double ss = std::sqrt(dot(s, s));
    const double yy = std::sqrt(dot(y, y));
    if (!(sy > 1e-12 * ss * yy)) return;  // curvature skip
    if (fresh_) {
      const double scale = sy / dot(y, y);
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
          h_[i * n_ + j] = (i == j) ? scale : 0.0;
        }
      }
      fresh_ = false;
    }
    const double rho = 1.0 / sy;
    std::vector<double> hy(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      const double* row = &h_[i * n_];
      for (std::size_t j = 0; j < n_; ++j) acc += row[j] * y[j];
      hy[i] = acc;
    }
    const double yhy = dot(hy, y);
    const double c = rho * rho * yhy + rho;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        h_[i * n_ + j] += c * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<double> h_;
  bool fresh_ = true;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Reduced mode: full-memory BFGS over nu with the positivity-preserving
// weak-Wolfe search. Requires all edge objectives to be zero.
// ---------------------------------------------------------------------------

inline SolveResult solve_reduced(const Problem& problem,
                                 const SolverConfig& config = {}) {
  SolveResult result;
  const ValidationReport report = validate(problem);
  if (!report.ok()) {
    result.status = SolveStatus::kInvalidProblem;
    result.message = report.violations.front();
    return result;
  }
  if (problem.has_nonzero_edge_objective()) {
    result.status = SolveStatus::kInvalidProblem;
    result.message = "solve_reduced requires all edge objectives to be zero";
    return result;
  }

  const detail::Stopwatch clock;
  const std::size_t n = problem.num_nodes;
  std::vector<double> nu = initial_dual(problem.objective);
  DualEval eval = detail::eval_dual(problem, nu, nullptr, config.subproblem_tol,
                                    config.threads);
  if (!eval.finite) {
    result.status = SolveStatus::kInvalidProblem;
    result.message = "initial dual point outside the dual domain";
    return result;
  }

  detail::BfgsMatrix hessian(n);
  std::vector<double> direction(n);
  std::vector<double> masked_grad(n);
  // Iterates live above a per-coordinate floor: the conjugate-domain bound
  // (the linear atom's price faces) or the strict-positivity floor elsewhere.
  std::vector<double> lb = conjugate_lower_bounds(problem.objective);
  for (double& f : lb) f = std::max(f, config.nu_floor);

  // Coordinates clamped onto their floor with the gradient still pushing
  // into it form the active set. They are masked out of the quasi-Newton
  // model: the dual optimum generically sits on those faces, where the raw
  // gradient never vanishes. The optimality metric is the projected
  // gradient, which does.
  std::vector<bool> active(n, false);
  auto refresh_active_set = [&](const DualEval& e) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool a = nu[j] <= lb[j] && e.grad[j] > 0.0;
      if (a != active[j]) {
        active[j] = a;
        hessian.reinit_coordinate(j);
      }
    }
  };
  auto mask = [&](const std::vector<double>& grad, std::vector<double>& out) {
    for (std::size_t j = 0; j < n; ++j) out[j] = active[j] ? 0.0 : grad[j];
  };
  auto push_row = [&](int iter, double step) {
    const double pg = detail::projected_nu_residual(nu, eval.grad, lb);
    detail::Metrics m = detail::metrics_of(problem, eval, pg, pg);
    result.trace.push_back({iter, eval.g, m.grad_inf, m.rel_gap,
                            m.primal_resid, step, clock.seconds()});
    return m;
  };

  detail::Metrics metrics = push_row(0, 0.0);
  result.status = SolveStatus::kMaxIter;
  int iter = 0;
  while (true) {
    if (metrics.rel_gap <= config.tol_gap &&
        metrics.rel_grad <= config.tol_grad) {
      result.status = SolveStatus::kOptimal;
      break;
    }
    if (iter >= config.max_iter) break;
    ++iter;

    refresh_active_set(eval);
    mask(eval.grad, masked_grad);
    hessian.apply_neg(masked_grad, direction);
    for (std::size_t j = 0; j < n; ++j) {
      if (active[j]) direction[j] = 0.0;
    }
    double slope = detail::dot(masked_grad, direction);
    if (!(slope < 0.0)) {
      hessian.reset();
      for (std::size_t j = 0; j < n; ++j) direction[j] = -masked_grad[j];
      slope = detail::dot(masked_grad, direction);
      if (!(slope < 0.0)) {
        // No feasible descent direction remains; the iterate is stationary
        // up to the boundary faces but the tolerances were not met.
        result.status = SolveStatus::kLineSearchFailure;
        --iter;
        break;
      }
    }

    // Cap the step so every iterate stays strictly positive. Positive
    // conjugate-domain floors (the linear atom's prices) are admissible
    // boundaries and are handled by clamping the trial path onto them
    // instead: the dual optimum generically sits on those faces.
    double t_max = kInf;
    for (std::size_t j = 0; j < n; ++j) {
      if (direction[j] < 0.0) {
        t_max = std::min(t_max, nu[j] / -direction[j]);
      }
    }
    t_max *= std::isfinite(t_max) ? config.boundary_fraction : 1.0;

    std::vector<double> trial(n);
    DualEval trial_eval;
    DualEval best_eval;
    double best_t = 0.0;
    auto phi = [&](double t) {
      for (std::size_t j = 0; j < n; ++j) {
        trial[j] = std::max(nu[j] + t * direction[j], lb[j]);
      }
      trial_eval = detail::eval_dual(problem, trial, nullptr,
                                     config.subproblem_tol, config.threads);
      if (trial_eval.finite &&
          (best_t == 0.0 || trial_eval.g < best_eval.g)) {
        best_eval = trial_eval;
        best_t = t;
      }
      RayEval r;
      r.g = trial_eval.g;
      r.slope = trial_eval.finite ? detail::dot(trial_eval.grad, direction)
                                  : 0.0;
      return r;
    };

    const LineSearchOutcome ls = line_search_weak_wolfe(
        phi, eval.g, slope, t_max, config.wolfe_c1, config.wolfe_c2);
    double step = 0.0;
    if (ls.success) {
      // The search accepts the probe it just evaluated, so trial/trial_eval
      // already hold the data at ls.t.
      step = ls.t;
    } else if (best_t > 0.0 && best_eval.g <= eval.g) {
      // The weak-Wolfe set along this ray is empty (the ray minimum sits on
      // a domain face); take the best non-increasing probe and keep
      // iterating. Near the optimum g is flat at floating-point resolution
      // while the iterate itself still improves.
      step = best_t;
      for (std::size_t j = 0; j < n; ++j) {
        trial[j] = std::max(nu[j] + best_t * direction[j], lb[j]);
      }
      trial_eval = best_eval;
    } else {
      result.status = SolveStatus::kLineSearchFailure;
      --iter;
      break;
    }

    bool moved = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (trial[j] != nu[j]) {
        moved = true;
        break;
      }
    }
    if (!moved) {
      // The accepted step rounds to zero displacement: the iterate cannot be
      // refined any further in floating point.
      result.status = SolveStatus::kLineSearchFailure;
      --iter;
      break;
    }

    std::vector<double> s(n), ydiff(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = trial[j] - nu[j];
      ydiff[j] =
          active[j] ? 0.0 : trial_eval.grad[j] - eval.grad[j];
    }
    nu = trial;
    eval = std::move(trial_eval);
    hessian.update(s, ydiff);

    metrics = push_row(iter, step);
  }

  result.iterations = iter;
  result.dual_value = eval.g;
  {
    const double pg = detail::projected_nu_residual(nu, eval.grad, lb);
    const detail::Metrics final_metrics =
        detail::metrics_of(problem, eval, pg, pg);
    result.primal_value = final_metrics.primal_value;
    result.rel_gap = final_metrics.rel_gap;
    result.primal_residual = final_metrics.primal_resid;
  }
  result.nu = std::move(nu);
  result.y_hat = eval.y_hat;
  result.flows = eval.flows;
  result.wall_time_s = clock.seconds();
  return result;
}

// ---------------------------------------------------------------------------
// Extended mode: spectral projected gradient over (nu, xi) >= 0 with a
// Barzilai-Borwein step and nonmonotone backtracking. The optimum generically
// sits on the xi boundary, where a projection-exact method is the simple
// robust choice. Edges with a zero objective keep their xi pinned at zero.
// ---------------------------------------------------------------------------

inline SolveResult solve_extended(const Problem& problem,
                                  const SolverConfig& config = {}) {
  SolveResult result;
  const ValidationReport report = validate(problem);
  if (!report.ok()) {
    result.status = SolveStatus::kInvalidProblem;
    result.message = report.violations.front();
    return result;
  }
  if (!problem.has_nonzero_edge_objective()) {
    return solve_reduced(problem, config);
  }

  const detail::Stopwatch clock;
  const std::size_t n = problem.num_nodes;
  const std::size_t m = problem.num_edges();

  // Variable layout: nu, then the xi block of every edge with a nonzero
  // objective. Zero-objective edges keep xi = 0 exactly (dom Vbar = {0}).
  std::vector<std::size_t> xi_offset(m, 0);
  std::size_t dim = n;
  for (std::size_t i = 0; i < m; ++i) {
    if (!is_zero_objective(problem.edge_objective(i))) {
      xi_offset[i] = dim;
      dim += edge_dim(problem.edges[i]);
    }
  }

  std::vector<double> z(dim, 0.0);
  {
    std::vector<double> nu0 = initial_dual(problem.objective);
    std::copy(nu0.begin(), nu0.end(), z.begin());
  }
  // Projection floor on the nu block: strictly positive, and never below the
  // conjugate-domain boundary (admissible for the linear atom).
  std::vector<double> nu_floor = conjugate_lower_bounds(problem.objective);
  for (double& f : nu_floor) f = std::max(f, config.nu_floor);

  auto unpack = [&](std::span<const double> zv, std::vector<double>& nu,
                    FlowVector& xi) {
    nu.assign(zv.begin(), zv.begin() + n);
    xi.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t di = edge_dim(problem.edges[i]);
      if (xi_offset[i] == 0) {
        xi[i].assign(di, 0.0);
      } else {
        xi[i].assign(zv.begin() + xi_offset[i], zv.begin() + xi_offset[i] + di);
      }
    }
  };

  auto project = [&](std::vector<double>& zv) {
    for (std::size_t j = 0; j < n; ++j) zv[j] = std::max(zv[j], nu_floor[j]);
    for (std::size_t j = n; j < dim; ++j) zv[j] = std::max(zv[j], 0.0);
  };

  std::vector<double> nu;
  FlowVector xi;
  auto evaluate = [&](std::span<const double> zv, DualEval& out,
                      std::vector<double>& grad_flat) {
    unpack(zv, nu, xi);
    out = detail::eval_dual(problem, nu, &xi, config.subproblem_tol,
                            config.threads);
    if (!out.finite) return false;
    grad_flat.assign(dim, 0.0);
    std::copy(out.grad.begin(), out.grad.end(), grad_flat.begin());
    for (std::size_t i = 0; i < m; ++i) {
      if (xi_offset[i] == 0) continue;
      std::copy(out.xi_grad[i].begin(), out.xi_grad[i].end(),
                grad_flat.begin() + xi_offset[i]);
    }
    return true;
  };

  project(z);
  DualEval eval;
  std::vector<double> grad;
  if (!evaluate(z, eval, grad)) {
    result.status = SolveStatus::kInvalidProblem;
    result.message = "initial dual point outside the dual domain";
    return result;
  }

  constexpr double kAlphaMin = 1e-10;
  constexpr double kAlphaMax = 1e10;

  auto projected_gradient_norm = [&](std::span<const double> zv,
                                     std::span<const double> gv) {
    double norm = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double floor = (j < n) ? nu_floor[j] : 0.0;
      const double stepped = std::max(zv[j] - gv[j], floor);
      norm = std::max(norm, std::abs(stepped - zv[j]));
    }
    return norm;
  };

  auto push_row = [&](int iter, double step) {
    const double nu_resid = detail::projected_nu_residual(
        std::span<const double>(z.data(), n),
        std::span<const double>(eval.grad.data(), n), nu_floor);
    detail::Metrics metr = detail::metrics_of(
        problem, eval, projected_gradient_norm(z, grad), nu_resid);
    result.trace.push_back({iter, eval.g, metr.grad_inf, metr.rel_gap,
                            metr.primal_resid, step, clock.seconds()});
    return metr;
  };

  detail::Metrics metrics = push_row(0, 0.0);
  std::vector<double> recent_g(1, eval.g);
  double alpha = 1.0 / std::max(metrics.grad_inf, 1.0);
  alpha = std::clamp(alpha, kAlphaMin, kAlphaMax);

  result.status = SolveStatus::kMaxIter;
  int iter = 0;
  std::vector<double> candidate(dim), direction(dim), trial(dim), trial_grad;
  DualEval trial_eval;
  while (true) {
    if (metrics.rel_gap <= config.tol_gap &&
        metrics.rel_grad <= config.tol_grad) {
      result.status = SolveStatus::kOptimal;
      break;
    }
    if (iter >= config.max_iter) break;
    ++iter;

    for (std::size_t j = 0; j < dim; ++j) candidate[j] = z[j] - alpha * grad[j];
    project(candidate);
    double slope = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      direction[j] = candidate[j] - z[j];
      slope += grad[j] * direction[j];
    }
    if (!(slope < 0.0)) {
      // Projected step points nowhere useful: stationary to machine
      // precision under the current scaling.
      result.status = SolveStatus::kLineSearchFailure;
      --iter;
      break;
    }

    const double g_ref = *std::max_element(recent_g.begin(), recent_g.end());
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < dim; ++j) trial[j] = z[j] + lambda * direction[j];
      if (evaluate(trial, trial_eval, trial_grad) &&
          trial_eval.g <= g_ref + config.wolfe_c1 * lambda * slope) {
        accepted = true;
        break;
      }
      lambda *= 0.5;  // dom Ubar violations backtrack through here as well
    }
    if (!accepted) {
      result.status = SolveStatus::kLineSearchFailure;
      --iter;
      break;
    }

    double sy = 0.0, ss = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double sj = trial[j] - z[j];
      ss += sj * sj;
      sy += sj * (trial_grad[j] - grad[j]);
    }
    alpha = (sy > 0.0) ? std::clamp(ss / sy, kAlphaMin, kAlphaMax) : kAlphaMax;

    z.swap(trial);
    grad.swap(trial_grad);
    eval = std::move(trial_eval);
    recent_g.push_back(eval.g);
    if (recent_g.size() > static_cast<std::size_t>(std::max(config.memory, 1))) {
      recent_g.erase(recent_g.begin());
    }
    metrics = push_row(iter, lambda);
  }

  unpack(z, nu, xi);
  result.iterations = iter;
  result.dual_value = eval.g;
  result.primal_value = metrics.primal_value;
  result.rel_gap = metrics.rel_gap;
  result.primal_residual = metrics.primal_resid;
  result.nu = std::move(nu);
  result.xi = std::move(xi);
  result.y_hat = eval.y_hat;
  result.flows = eval.flows;
  result.wall_time_s = clock.seconds();
  return result;
}

// Mode dispatch: auto selects extended exactly when some edge objective is
// nonzero; reduced refuses problems it cannot represent.
inline SolveResult solve(const Problem& problem,
                         const SolverConfig& config = {}) {
  switch (config.mode) {
    case SolveMode::kReduced:
      return solve_reduced(problem, config);
    case SolveMode::kExtended:
      return solve_extended(problem, config);
    case SolveMode::kAuto:
      return problem.has_nonzero_edge_objective()
                 ? solve_extended(problem, config)
                 : solve_reduced(problem, config);
  }
  return SolveResult{};
}

}  // namespace convexflows
