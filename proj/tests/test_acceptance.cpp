// Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <set>

#include "test_util.hpp"

using namespace convexflows;

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

void report(int id, const char* name, bool pass, double seconds) {
  std::printf("[CRITERION %2d] %-28s %s  (%.2f s)\n", id, name,
              pass ? "PASS" : "FAIL", seconds);
  std::fflush(stdout);
}

// g >= primal - 1e-9 max(1,|g|) on every trace row, i.e. rel_gap >= -1e-9.
::testing::AssertionResult weak_duality_holds(const SolveResult& r) {
  for (const TraceRow& row : r.trace) {
    if (!(row.rel_gap >= -1e-9)) {
      return ::testing::AssertionFailure()
             << "weak duality violated at iter " << row.iter
             << ": rel_gap=" << row.rel_gap;
    }
  }
  return ::testing::AssertionSuccess();
}

double min_trace_gap(const SolveResult& r) {
  double best = kInf;
  for (const TraceRow& row : r.trace) best = std::min(best, row.rel_gap);
  return best;
}

std::string strip_time_column(const std::string& csv) {
  std::string out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t eol = csv.find('\n', pos);
    if (eol == std::string::npos) eol = csv.size();
    const std::string line = csv.substr(pos, eol - pos);
    const std::size_t last_comma = line.rfind(',');
    out += line.substr(0, last_comma);
    out += '\n';
    pos = eol + 1;
  }
  return out;
}

}  // namespace

// 1. Analytic dual gradient vs central finite differences on random mixed
//    instances, every objective atom, 20 interior points each.
TEST(Acceptance, C01_GradientCorrectness) {
  Timer timer;
  bool pass = true;
  Xoshiro256ss rng(10001);
  for (int inst = 0; inst < 20; ++inst) {
    const int atom_kind = inst % 3;
    const std::size_t n = 4 + rng.below(7);   // <= 10
    const std::size_t m = 4 + rng.below(17);  // <= 20
    const Problem p = testutil::random_instance(rng, atom_kind, n, m);
    for (int pt = 0; pt < 20; ++pt) {
      const std::vector<double> nu = testutil::random_interior_point(rng, p);
      const DualEval e = dual_eval(p, nu);
      const std::vector<double> fd = finite_diff_grad(
          [&](std::span<const double> probe) {
            return detail::eval_dual(p, probe, nullptr, 1e-12, 1).g;
          },
          nu, 1e-6);
      double scale = 1.0;
      for (double gj : e.grad) scale = std::max(scale, std::abs(gj));
      for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(fd[j] - e.grad[j]) > 1e-5 * scale) {
          pass = false;
          ADD_FAILURE() << "instance " << inst << " atom " << atom_kind
                        << " coord " << j << ": fd=" << fd[j]
                        << " analytic=" << e.grad[j];
        }
      }
    }
  }
  const double t = timer.seconds();
  pass = pass && t < 10.0;
  EXPECT_LT(t, 10.0);
  report(1, "gradient correctness", pass, t);
  EXPECT_TRUE(pass);
}

// 2. Closed-form arbitrage vs the generic bisection path over 1000 random
//    price ratios per family, clamp regions included.
TEST(Acceptance, C02_ClosedFormVsGeneric) {
  Timer timer;
  bool pass = true;
  // anchored closed form: w* = beta^-1 log((3 eta2 - eta1)/(eta2 + eta1))
  {
    const GainEdge line(IncidenceMap{0, 1}, PowerLineGain{16.0, 0.25}, 4.0);
    const ArbitrageResult r = arbitrage_two_node(line, 1.0, 3.0, 1e-12);
    if (std::abs(r.w - 4.0 * std::log(2.0)) > 1e-12) pass = false;
  }
  Xoshiro256ss rng(10002);
  std::vector<GainEdge> families = {
      GainEdge(IncidenceMap{0, 1}, PowerLineGain{16.0, 0.25}, 4.0),
      GainEdge(IncidenceMap{0, 1}, StorageGain{0.8, 1e-2}, 10.0),
      GainEdge(IncidenceMap{0, 1}, LosslessGain{1e-4}, 100.0),
      GainEdge(IncidenceMap{0, 1}, UniswapGain{120.0, 150.0, 0.997}, 1e4),
  };
  for (const GainEdge& edge : families) {
    const GainEdge generic = testutil::strip_closed_form(edge);
    const double tol = 1e-9 * std::max(1.0, edge.ub());
    const double d0 = edge.dgain(0.0);
    for (int trial = 0; trial < 1000; ++trial) {
      // cover the active interval and both clamp regions
      const double ratio = (trial % 10 == 0) ? rng.uniform(d0, 2.0 * d0 + 1.0)
                                             : rng.uniform(0.0, 1.2 * d0);
      const double w_closed = arbitrage_two_node(edge, ratio, 1.0, tol).w;
      const double w_generic = arbitrage_two_node(generic, ratio, 1.0, tol).w;
      if (std::abs(w_closed - w_generic) > 1e-7 * std::max(1.0, edge.ub())) {
        pass = false;
        ADD_FAILURE() << "ratio=" << ratio << " closed=" << w_closed
                      << " generic=" << w_generic;
      }
    }
  }
  const double t = timer.seconds();
  pass = pass && t < 5.0;
  EXPECT_LT(t, 5.0);
  report(2, "closed form vs generic", pass, t);
  EXPECT_TRUE(pass);
}

namespace {

// Tiny instances for the oracle comparison: m <= 3 two-node edges with
// small capacities, quadratic objectives.
Problem tiny_oracle_instance(Xoshiro256ss& rng) {
  std::size_t m = 1 + rng.below(3);
  const std::size_t n = 2 + rng.below(4);
  if (n == 2) m = std::min<std::size_t>(m, 2);  // only two ordered pairs exist
  Problem p;
  p.num_nodes = n;
  std::set<std::pair<NodeIndex, NodeIndex>> used;
  for (std::size_t i = 0; i < m; ++i) {
    NodeIndex a = rng.below(n), b = rng.below(n);
    while (b == a || used.contains({a, b})) {
      a = rng.below(n);
      b = rng.below(n);
      while (b == a) b = rng.below(n);
    }
    used.insert({a, b});
    switch (rng.below(4)) {
      case 0:
        p.edges.emplace_back(GainEdge(IncidenceMap{a, b},
                                      PowerLineGain{16.0, 0.25},
                                      1.0 + static_cast<double>(rng.below(3))));
        break;
      case 1: {
        const double gamma = rng.uniform(0.5, 1.0);
        p.edges.emplace_back(GainEdge(IncidenceMap{a, b},
                                      StorageGain{gamma, 1e-2},
                                      rng.uniform(2.0, 10.0)));
        break;
      }
      case 2:
        p.edges.emplace_back(GainEdge(IncidenceMap{a, b}, LosslessGain{1e-2},
                                      rng.uniform(2.0, 10.0)));
        break;
      default:
        p.edges.emplace_back(GainEdge(
            IncidenceMap{a, b},
            UniswapGain{rng.uniform(100.0, 200.0), rng.uniform(100.0, 200.0),
                        0.997},
            20.0));
        break;
    }
  }
  std::vector<double> d(n), kappa(n);
  for (auto& v : d) v = rng.uniform(0.0, 3.0);
  for (auto& v : kappa) v = rng.uniform(0.5, 2.0);
  p.objective = NonpositiveQuadraticAtom(std::move(d), std::move(kappa));
  return p;
}

}  // namespace

// 3. Solver objective matches the brute-force grid oracle on 50 tiny
//    instances.
TEST(Acceptance, C03_OracleEquivalence) {
  Timer timer;
  bool pass = true;
  Xoshiro256ss rng(10003);
  for (int inst = 0; inst < 50; ++inst) {
    const Problem p = tiny_oracle_instance(rng);
    SolverConfig config;
    config.tol_gap = 1e-10;
    config.tol_grad = 1e-9;
    const SolveResult solved = solve_reduced(p, config);
    const double primal = u_eval(p.objective, solved.y_hat);
    const GridOracleResult oracle = grid_oracle(p, 1e-2);
    if (std::abs(primal - oracle.value) > 1e-3) {
      pass = false;
      ADD_FAILURE() << "instance " << inst << ": solver=" << primal
                    << " oracle=" << oracle.value;
    }
    // oracle sandwich
    if (!(oracle.value <= primal + 1e-9 && primal <= solved.dual_value + 1e-9)) {
      pass = false;
      ADD_FAILURE() << "oracle sandwich violated on instance " << inst;
    }
    EXPECT_TRUE(weak_duality_holds(solved));
  }
  const double t = timer.seconds();
  pass = pass && t < 60.0;
  EXPECT_LT(t, 60.0);
  report(3, "grid oracle equivalence", pass, t);
  EXPECT_TRUE(pass);
}

// 4. Weak duality on every trace row of a representative run set (the other
//    criteria check their own runs as well).
TEST(Acceptance, C04_WeakDualityEverywhere) {
  Timer timer;
  bool pass = true;
  std::vector<SolveResult> runs;
  {
    SolverConfig config;
    config.tol_gap = 1e-9;
    runs.push_back(solve(generate_opf(3, 120, 0, true), config));
    runs.push_back(solve(generate_opf(30, 2, 1), config));
    runs.push_back(solve(generate_fisher(4, 4, 2), config));
  }
  {
    SolverConfig config;
    config.max_iter = 2000;
    runs.push_back(solve(generate_cfmm(50, 3), config));
    SolverConfig ext = config;
    ext.max_iter = 5000;
    runs.push_back(solve(generate_cfmm(25, 4, true), ext));
  }
  for (const SolveResult& r : runs) {
    if (!weak_duality_holds(r)) pass = false;
    EXPECT_TRUE(weak_duality_holds(r));
  }
  report(4, "weak duality everywhere", pass, timer.seconds());
  EXPECT_TRUE(pass);
}

// 5. Desk-scale OPF convergence: n=100, T=2 across 10 seeds.
TEST(Acceptance, C05_OpfConvergence) {
  Timer timer;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Timer per_instance;
    const Problem p = generate_opf(100, 2, seed);
    SolverConfig config;
    config.tol_gap = 1e-9;
    config.tol_grad = 1e-9;
    config.max_iter = 500;
    const SolveResult r = solve_reduced(p, config);
    const double t = per_instance.seconds();
    bool reached = false;
    for (const TraceRow& row : r.trace) {
      if (row.rel_gap <= 1e-8 && row.primal_resid <= 1e-6) {
        reached = true;
        break;
      }
    }
    if (!reached || r.iterations > 500 || t >= 10.0) {
      pass = false;
      ADD_FAILURE() << "seed " << seed << ": status=" << to_string(r.status)
                    << " rel_gap=" << r.rel_gap
                    << " resid=" << r.primal_residual
                    << " iters=" << r.iterations << " time=" << t;
    }
    EXPECT_TRUE(weak_duality_holds(r));
  }
  report(5, "opf desk-scale convergence", pass, timer.seconds());
  EXPECT_TRUE(pass);
}

// 6. CFMM routing across 10 seeds: reduced mode reaches gap <= 1e-6 with an
//    essentially nonnegative recovered trade; the penalties variant solves in
//    extended mode and certifies optimality at 1e-4.
TEST(Acceptance, C06_CfmmRouting) {
  Timer timer;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Timer per_instance;
    const Problem p = generate_cfmm(100, seed);
    SolverConfig config;
    config.tol_gap = 1e-7;
    config.tol_grad = 1e-9;
    config.max_iter = 3000;
    const SolveResult r = solve_reduced(p, config);
    double min_y = kInf;
    for (double v : r.y_hat) min_y = std::min(min_y, v);
    if (!(min_trace_gap(r) <= 1e-6) || !(min_y >= -1e-6)) {
      pass = false;
      ADD_FAILURE() << "seed " << seed << " reduced: gap=" << min_trace_gap(r)
                    << " min_y=" << min_y << " status=" << to_string(r.status);
    }
    EXPECT_TRUE(weak_duality_holds(r));

    const Problem pp = generate_cfmm(100, seed, /*with_penalties=*/true);
    SolverConfig ext;
    ext.tol_gap = 1e-6;
    ext.tol_grad = 1e-7;
    ext.max_iter = 20000;
    const SolveResult re = solve_extended(pp, ext);
    const OptimalityReport cert = check_optimality(pp, re);
    if (!(min_trace_gap(re) <= 1e-5) || !cert.pass(1e-4)) {
      pass = false;
      ADD_FAILURE() << "seed " << seed << " extended: gap=" << min_trace_gap(re)
                    << " support=" << cert.max_support_violation
                    << " stationarity=" << cert.max_stationarity_violation
                    << " cert_gap=" << cert.gap
                    << " resid=" << cert.primal_residual;
    }
    EXPECT_TRUE(weak_duality_holds(re));
    const double t = per_instance.seconds();
    if (t >= 30.0) {
      pass = false;
      ADD_FAILURE() << "seed " << seed << " too slow: " << t;
    }
  }
  report(6, "cfmm routing", pass, timer.seconds());
  EXPECT_TRUE(pass);
}

// 7. Three-node battery scenario: exact counts and the battery strictly
//    reduces total generation cost.
TEST(Acceptance, C07_BatteryScenario) {
  Timer timer;
  bool pass = true;
  const Problem with_battery = generate_opf(3, 120, 0, true);
  pass = pass && with_battery.num_nodes == 360 && with_battery.edges.size() == 359;
  EXPECT_EQ(with_battery.num_nodes, 360u);
  EXPECT_EQ(with_battery.edges.size(), 359u);

  Problem no_battery = with_battery;
  std::erase_if(no_battery.edges, [](const Edge& e) {
    return std::holds_alternative<GainEdge>(e) &&
           std::holds_alternative<StorageGain>(std::get<GainEdge>(e).family());
  });

  SolverConfig config;
  config.tol_gap = 1e-9;
  config.tol_grad = 1e-8;
  config.max_iter = 2000;
  const SolveResult a = solve_reduced(with_battery, config);
  const SolveResult b = solve_reduced(no_battery, config);
  const double cost_with = -u_eval(with_battery.objective, a.y_hat);
  const double cost_without = -u_eval(no_battery.objective, b.y_hat);
  if (!(cost_with <= cost_without)) pass = false;
  const double improvement = (cost_without - cost_with) / cost_without;
  if (!(improvement >= 0.01)) {
    pass = false;
    ADD_FAILURE() << "improvement " << improvement << " below 1%";
  }
  EXPECT_TRUE(weak_duality_holds(a));
  EXPECT_TRUE(weak_duality_holds(b));
  const double t = timer.seconds();
  pass = pass && t < 5.0;
  EXPECT_LT(t, 5.0);
  report(7, "battery scenario", pass, t);
  EXPECT_TRUE(pass);
}

// 8. The no-flow shortcut never disagrees with a from-scratch scalar solve.
TEST(Acceptance, C08_NoFlowSoundness) {
  Timer timer;
  bool pass = true;
  Xoshiro256ss rng(10008);
  int checked = 0;
  int disagreements = 0;
  while (checked < 10000) {
    const GainEdge edge = testutil::random_gain_edge(
        rng, 0, 1, static_cast<int>(rng.below(4)));
    const double eta2 = rng.uniform(0.1, 3.0);
    const double d0 = edge.dgain(0.0);
    const double ratio = rng.uniform(d0, 3.0 * d0 + 1.0);
    const double eta1 = ratio * eta2;
    if (!no_flow_check(edge, eta1, eta2)) continue;
    ++checked;
    const double tol = 1e-6 * std::max(1.0, edge.ub());
    const double w = testutil::ternary_arbitrage(edge, eta1, eta2, tol);
    if (!(w <= tol)) {
      ++disagreements;
      ADD_FAILURE() << "no-flow disagreement: w=" << w << " tol=" << tol;
    }
  }
  pass = disagreements == 0;
  report(8, "no-flow shortcut soundness", pass, timer.seconds());
  EXPECT_TRUE(pass);
}

// 9. Criteria 5-6 reruns with 1, 4, and 8 workers produce identical traces
//    (wall-clock column excluded; everything else must match bit for bit).
TEST(Acceptance, C09_Determinism) {
  Timer timer;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    {
      const Problem p = generate_opf(100, 2, seed);
      SolverConfig config;
      config.tol_gap = 1e-9;
      config.tol_grad = 1e-9;
      config.max_iter = 500;
      std::string reference;
      for (int threads : {1, 4, 8}) {
        config.threads = threads;
        const SolveResult r = solve_reduced(p, config);
        const std::string body = strip_time_column(trace_to_csv(r.trace));
        if (threads == 1) {
          reference = body;
        } else if (body != reference) {
          pass = false;
          ADD_FAILURE() << "opf seed " << seed << " trace differs at threads="
                        << threads;
        }
      }
    }
    {
      const Problem p = generate_cfmm(100, seed);
      SolverConfig config;
      config.tol_gap = 1e-7;
      config.tol_grad = 1e-9;
      config.max_iter = 3000;
      std::string reference;
      for (int threads : {1, 4, 8}) {
        config.threads = threads;
        const SolveResult r = solve_reduced(p, config);
        const std::string body = strip_time_column(trace_to_csv(r.trace));
        if (threads == 1) {
          reference = body;
        } else if (body != reference) {
          pass = false;
          ADD_FAILURE() << "cfmm seed " << seed << " trace differs at threads="
                        << threads;
        }
      }
    }
  }
  report(9, "determinism across threads", pass, timer.seconds());
  EXPECT_TRUE(pass);
}

// 10. Fisher market: positive recovered buyer utilities and a clean
//     optimality certificate.
TEST(Acceptance, C10_FisherMarket) {
  Timer timer;
  bool pass = true;
  const Problem p = generate_fisher(5, 5, 1);
  SolverConfig config;
  config.tol_gap = 1e-9;
  config.tol_grad = 1e-9;
  config.max_iter = 2000;
  const SolveResult r = solve_reduced(p, config);
  if (r.status != SolveStatus::kOptimal) pass = false;
  for (std::size_t i = 0; i < 5; ++i) {
    if (!(r.y_hat[i] > 0.0)) {
      pass = false;
      ADD_FAILURE() << "buyer " << i << " utility " << r.y_hat[i];
    }
  }
  const OptimalityReport cert = check_optimality(p, r);
  if (!cert.pass(1e-5)) {
    pass = false;
    ADD_FAILURE() << "certificate: support=" << cert.max_support_violation
                  << " gap=" << cert.gap << " resid=" << cert.primal_residual;
  }
  EXPECT_TRUE(weak_duality_holds(r));
  const double t = timer.seconds();
  pass = pass && t < 5.0;
  EXPECT_LT(t, 5.0);
  report(10, "fisher market", pass, t);
  EXPECT_TRUE(pass);
}
