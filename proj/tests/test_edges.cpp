#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace convexflows;
using testutil::strip_closed_form;
using testutil::ternary_arbitrage;

namespace {

GainEdge power_line(double ub = 4.0) {
  return GainEdge(IncidenceMap{0, 1}, PowerLineGain{16.0, 0.25}, ub);
}

GainEdge uniswap(double r1, double r2, double fee, double ub = 1e6) {
  return GainEdge(IncidenceMap{0, 1}, UniswapGain{r1, r2, fee}, ub);
}

}  // namespace

TEST(GainEval, PowerLineValues) {
  const GainEdge edge = power_line();
  EXPECT_DOUBLE_EQ(edge.gain(0.0), 0.0);
  // Direct evaluation of 3 - 16 (log(1 + e^{1/4}) - log 2).
  const double expected = 3.0 - 16.0 * (std::log1p(std::exp(0.25)) - std::log(2.0));
  EXPECT_NEAR(edge.gain(1.0), expected, 1e-12);
  EXPECT_NEAR(edge.gain(1.0), 0.8753241708976276, 1e-12);
}

TEST(GainEval, UniswapHalfReserves) {
  const GainEdge edge = uniswap(100.0, 100.0, 1.0);
  EXPECT_DOUBLE_EQ(edge.gain(100.0), 50.0);
}

TEST(GainEval, OutsideDomainIsMinusInfinity) {
  const GainEdge edge = power_line();
  EXPECT_EQ(edge.gain(-0.1), -kInf);
  EXPECT_EQ(edge.gain(4.1), -kInf);
}

TEST(GainEval, NonFiniteOracleThrows) {
  CustomGain bad;
  bad.h = [](double w) { return w > 0.5 ? std::nan("") : w; };
  const GainEdge edge(IncidenceMap{0, 1}, std::move(bad), 1.0);
  EXPECT_THROW(edge.gain(0.75), std::runtime_error);
}

TEST(NoFlowCheck, UniswapSpread) {
  const GainEdge edge = uniswap(100.0, 100.0, 0.997);
  // h+(0) = fee * R2/R1 = 0.997; equal prices sit inside the spread.
  EXPECT_DOUBLE_EQ(edge.dgain(0.0), 0.997);
  EXPECT_TRUE(no_flow_check(edge, 1.0, 1.0));
  // ratio ~ 1.0101 > 0.997: still no flow
  EXPECT_TRUE(no_flow_check(edge, 1.0, 0.99));
  // ratio below the marginal gain: the trade is profitable
  EXPECT_FALSE(no_flow_check(edge, 0.99, 1.0));
}

TEST(NoFlowCheck, PowerLineUnitDerivativeAtZero) {
  const GainEdge edge = power_line();
  EXPECT_DOUBLE_EQ(edge.dgain(0.0), 1.0);  // 3 - 4 sigmoid(0)
  EXPECT_TRUE(no_flow_check(edge, 1.0, 1.0));
  EXPECT_FALSE(no_flow_check(edge, 0.999, 1.0));
}

TEST(NoFlowCheck, InvalidPricesThrow) {
  const GainEdge edge = power_line();
  EXPECT_THROW(no_flow_check(edge, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(no_flow_check(edge, 1.0, -1.0), std::invalid_argument);
}

TEST(Arbitrage, PowerLineClosedForm) {
  const GainEdge edge = power_line(4.0);
  const ArbitrageResult r = arbitrage_two_node(edge, 1.0, 3.0, 1e-10);
  const double expected_w = 4.0 * std::log(2.0);  // beta^-1 log((3*3-1)/(3+1))
  EXPECT_NEAR(r.w, expected_w, 1e-12);
  EXPECT_NEAR(edge.dgain(r.w), 1.0 / 3.0, 1e-12);  // h'(w*) = eta1/eta2
  // Independent check: bisection path on the stripped edge to 1e-8.
  const GainEdge generic = strip_closed_form(edge);
  const ArbitrageResult rb = arbitrage_two_node(generic, 1.0, 3.0, 1e-10);
  EXPECT_NEAR(rb.w, expected_w, 1e-8);
}

TEST(Arbitrage, NoFlowShortCircuit) {
  for (const GainEdge& edge :
       {power_line(), uniswap(100, 100, 0.997),
        GainEdge(IncidenceMap{0, 1}, StorageGain{0.9, 1e-3}, 10.0)}) {
    const double ratio = edge.dgain(0.0) + 0.5;
    const ArbitrageResult r = arbitrage_two_node(edge, ratio, 1.0, 1e-10);
    EXPECT_EQ(r.w, 0.0);
    EXPECT_EQ(r.value, 0.0);
    EXPECT_EQ(r.flow[0], 0.0);
    EXPECT_EQ(r.flow[1], 0.0);
  }
}

TEST(Arbitrage, UniswapClosedFormExample) {
  const GainEdge edge = uniswap(100.0, 100.0, 1.0);
  const ArbitrageResult r = arbitrage_two_node(edge, 1.0, 4.0, 1e-10);
  EXPECT_NEAR(r.w, 100.0, 1e-9);  // sqrt(4e4) - 100
  EXPECT_NEAR(r.value, 100.0, 1e-9);
  // 1-D grid oracle around the optimum at step 1e-3.
  double best = -kInf;
  for (double w = 0.0; w <= 1000.0; w += 1e-3) {
    best = std::max(best, -w + 4.0 * edge.gain(w));
  }
  EXPECT_NEAR(r.value, best, 1e-5);
}

TEST(Arbitrage, InvalidPricesThrow) {
  const GainEdge edge = power_line();
  EXPECT_THROW(arbitrage_two_node(edge, 1.0, 0.0, 1e-8), std::invalid_argument);
  EXPECT_THROW(arbitrage_two_node(edge, -1.0, 1.0, 1e-8), std::invalid_argument);
  EXPECT_THROW(arbitrage_two_node(edge, 1.0, 2.0, 0.0), std::invalid_argument);
}

TEST(Support, BoxComponentwise) {
  const HyperEdge edge(IncidenceMap{0, 1, 2},
                       BoxHyperEdge{{-1.0, -1.0, -1.0}, {2.0, 3.0, 0.0}});
  const std::vector<double> eta{1.0, 2.0, 5.0};
  const SupportResult r = edge.support(eta);
  EXPECT_DOUBLE_EQ(r.value, 8.0);
  EXPECT_EQ(r.flow, (std::vector<double>{2.0, 3.0, 0.0}));

  const std::vector<double> zero{0.0, 0.0, 0.0};
  const SupportResult rz = edge.support(zero);
  EXPECT_DOUBLE_EQ(rz.value, 0.0);
  EXPECT_EQ(rz.flow, zero);

  const std::vector<double> mixed{-1.0, 0.5, 0.0};
  const SupportResult rm = edge.support(mixed);
  EXPECT_EQ(rm.flow, (std::vector<double>{-1.0, 3.0, 0.0}));
  EXPECT_DOUBLE_EQ(rm.value, 2.5);
}

TEST(Support, GainEdgeComposition) {
  const Edge edge = power_line(4.0);
  const std::vector<double> eta{1.0, 3.0};
  const SupportResult r = edge_support(edge, eta, 1e-10);
  const double w = 4.0 * std::log(2.0);
  const double hw = 3.0 * w - 16.0 * (std::log(3.0) - std::log(2.0));
  EXPECT_NEAR(hw, 1.830324436988711, 1e-12);
  EXPECT_NEAR(r.value, -w + 3.0 * hw, 1e-12);
  EXPECT_NEAR(r.value, 2.718384588726352, 1e-12);
  EXPECT_NEAR(r.flow[0], -w, 1e-12);
  EXPECT_NEAR(r.flow[1], hw, 1e-12);
}

TEST(Support, CustomOracleRoundTrips) {
  // custom support oracle reproducing a box
  CustomHyperEdge oracle;
  oracle.oracle = [](std::span<const double> eta) {
    SupportResult r;
    r.flow.resize(eta.size());
    for (std::size_t k = 0; k < eta.size(); ++k) {
      r.flow[k] = eta[k] > 0.0 ? 1.0 : (eta[k] < 0.0 ? -1.0 : 0.0);
      r.value += eta[k] * r.flow[k];
    }
    return r;
  };
  const HyperEdge custom(IncidenceMap{0, 1}, std::move(oracle));
  const HyperEdge box(IncidenceMap{0, 1},
                      BoxHyperEdge{{-1.0, -1.0}, {1.0, 1.0}});
  Xoshiro256ss rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> eta{rng.uniform(-2.0, 2.0),
                                  rng.uniform(-2.0, 2.0)};
    EXPECT_DOUBLE_EQ(custom.support(eta).value, box.support(eta).value);
  }
}

TEST(Support, UnboundedCustomOracleThrows) {
  CustomHyperEdge oracle;
  oracle.oracle = [](std::span<const double> eta) {
    return SupportResult{kInf, std::vector<double>(eta.size(), 0.0)};
  };
  const HyperEdge edge(IncidenceMap{0, 1}, std::move(oracle));
  const std::vector<double> eta{1.0, 1.0};
  EXPECT_THROW(edge.support(eta), std::runtime_error);
}

TEST(HomogeneityNormalize, Ratios) {
  EXPECT_DOUBLE_EQ(homogeneity_normalize(2.0, 4.0), 0.5);
  EXPECT_DOUBLE_EQ(homogeneity_normalize(0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(homogeneity_normalize(3.0, 1.5), 2.0);
  EXPECT_THROW(homogeneity_normalize(1.0, 0.0), std::invalid_argument);
}

namespace {

std::vector<GainEdge> builtin_family_samples() {
  return {
      power_line(4.0),
      GainEdge(IncidenceMap{0, 1}, StorageGain{0.8, 1e-2}, 10.0),
      GainEdge(IncidenceMap{0, 1}, LosslessGain{1e-4}, 100.0),
      uniswap(120.0, 150.0, 0.997, 1e4),
      GainEdge(IncidenceMap{0, 1}, BalancerTwoGain{150.0, 120.0, 0.8, 0.997},
               1e4),
      GainEdge(IncidenceMap{0, 1}, SqrtGain{2.0, 3.0}, 1.0),
  };
}

}  // namespace

// f(eta) >= eta'x for random allowable flows x = (-w, u h(w)), u in [0,1].
TEST(EdgeProperties, SupportDominance) {
  Xoshiro256ss rng(2024);
  for (const GainEdge& edge : builtin_family_samples()) {
    const Edge as_edge = edge;
    for (int trial = 0; trial < 100; ++trial) {
      const double w = rng.uniform(0.0, edge.ub());
      const double u = rng.uniform(0.0, 1.0);
      const std::vector<double> x{-w, u * edge.gain(w)};
      const std::vector<double> eta{rng.uniform(0.0, 3.0),
                                    rng.uniform(0.1, 3.0)};
      const SupportResult r = edge_support(as_edge, eta, 1e-10);
      EXPECT_GE(r.value, eta[0] * x[0] + eta[1] * x[1] - 1e-9);
    }
  }
}

// x*(t eta) = x*(eta) and f(t eta) = t f(eta).
TEST(EdgeProperties, PositiveHomogeneity) {
  Xoshiro256ss rng(31);
  for (const GainEdge& edge : builtin_family_samples()) {
    const Edge as_edge = edge;
    for (int trial = 0; trial < 50; ++trial) {
      const std::vector<double> eta{rng.uniform(0.0, 2.0),
                                    rng.uniform(0.2, 2.0)};
      const SupportResult base = edge_support(as_edge, eta, 1e-10);
      for (double t : {0.5, 2.0, 10.0}) {
        const std::vector<double> scaled{t * eta[0], t * eta[1]};
        const SupportResult r = edge_support(as_edge, scaled, 1e-10);
        const double tol = 1e-8 * std::max(1.0, std::abs(t * base.value));
        EXPECT_NEAR(r.value, t * base.value, tol);
        EXPECT_NEAR(r.flow[0], base.flow[0], 1e-8 * std::max(1.0, std::abs(base.flow[0])));
        EXPECT_NEAR(r.flow[1], base.flow[1], 1e-8 * std::max(1.0, std::abs(base.flow[1])));
      }
    }
  }
}

// eta2 h+(w*+d) <= eta1 + tol eta2 and eta1 <= eta2 h-(w*-d) + tol eta2.
TEST(EdgeProperties, SandwichCertificate) {
  Xoshiro256ss rng(47);
  const double tol = 1e-6;
  for (const GainEdge& edge : builtin_family_samples()) {
    for (int trial = 0; trial < 200; ++trial) {
      const double eta2 = rng.uniform(0.2, 3.0);
      const double eta1 = rng.uniform(0.0, 3.0);
      const ArbitrageResult r = arbitrage_two_node(edge, eta1, eta2, tol);
      const double ratio = eta1 / eta2;
      if (r.w + tol <= edge.ub()) {
        EXPECT_LE(edge.dgain(r.w + tol), ratio + tol)
            << "family sample, eta=(" << eta1 << "," << eta2 << ")";
      }
      if (r.w - tol >= 0.0) {
        EXPECT_GE(edge.dgain(r.w - tol), ratio - tol);
      }
    }
  }
}

TEST(EdgeProperties, BuiltinGainsAreConcaveAndNondecreasing) {
  Xoshiro256ss rng(83);
  for (const GainEdge& edge : builtin_family_samples()) {
    for (int trial = 0; trial < 1000; ++trial) {
      const double a = rng.uniform(0.0, edge.ub());
      const double b = rng.uniform(0.0, edge.ub());
      const double mid = 0.5 * (a + b);
      EXPECT_GE(edge.gain(mid),
                0.5 * (edge.gain(a) + edge.gain(b)) - 1e-10);
    }
    for (int trial = 0; trial < 100; ++trial) {
      const double a = rng.uniform(0.0, edge.ub());
      const double b = rng.uniform(0.0, edge.ub());
      if (a <= b) {
        EXPECT_LE(edge.gain(a), edge.gain(b) + 1e-12);
      }
    }
    EXPECT_DOUBLE_EQ(edge.gain(0.0), 0.0);
  }
}

// Closed-form w* agrees with the generic bisection path over random ratios,
// including the clamp regions.
TEST(EdgeProperties, ClosedFormMatchesBisection) {
  Xoshiro256ss rng(4242);
  for (const GainEdge& edge : builtin_family_samples()) {
    if (!edge.has_closed_form()) continue;
    const GainEdge generic = strip_closed_form(edge);
    const double tol = 1e-9 * std::max(1.0, edge.ub());
    for (int trial = 0; trial < 1000; ++trial) {
      // bias ratios toward the active interval but keep clamp coverage
      const double d0 = edge.dgain(0.0);
      const double ratio = rng.uniform(0.0, 1.5 * d0);
      const ArbitrageResult closed = arbitrage_two_node(edge, ratio, 1.0, tol);
      const ArbitrageResult bisect =
          arbitrage_two_node(generic, ratio, 1.0, tol);
      EXPECT_NEAR(closed.w, bisect.w, 1e-7 * std::max(1.0, edge.ub()))
          << "ratio=" << ratio;
    }
  }
}

TEST(EdgeProperties, LosslessConservation) {
  const double eps = 1e-6;
  const double ub = 100.0;
  const GainEdge edge(IncidenceMap{0, 1}, LosslessGain{eps}, ub);
  Xoshiro256ss rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const double eta1 = rng.uniform(0.0, 2.0);
    const ArbitrageResult r = arbitrage_two_node(edge, eta1, 1.0, 1e-10);
    EXPECT_LE(std::abs(r.flow[0] + r.flow[1]), 0.5 * eps * ub * ub + 1e-12);
  }
}

TEST(EdgeProperties, BalancerRoutesThroughBisection) {
  const GainEdge edge(IncidenceMap{0, 1}, BalancerTwoGain{150.0, 120.0, 0.8, 0.997}, 1e4);
  EXPECT_FALSE(edge.has_closed_form());
  // Against the derivative-free ternary oracle.
  Xoshiro256ss rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const double eta1 = rng.uniform(0.01, 2.0);
    const double eta2 = rng.uniform(0.2, 2.0);
    const ArbitrageResult r = arbitrage_two_node(edge, eta1, eta2, 1e-9);
    const double oracle = ternary_arbitrage(edge, eta1, eta2, 1e-7);
    EXPECT_NEAR(r.w, oracle, 1e-4 * std::max(1.0, oracle));
  }
}

TEST(GainEdgeValidation, ConstructionErrors) {
  EXPECT_THROW(GainEdge(IncidenceMap{0, 1}, PowerLineGain{16.0, 0.5}, 1.0),
               std::invalid_argument);  // alpha*beta != 4
  EXPECT_THROW(GainEdge(IncidenceMap{0, 1}, PowerLineGain{16.0, 0.25}, 100.0),
               std::invalid_argument);  // not increasing up to ub
  EXPECT_THROW(GainEdge(IncidenceMap{0, 1}, StorageGain{0.5, 1e-2}, 80.0),
               std::invalid_argument);  // ub > gamma/eps
  EXPECT_THROW(GainEdge(IncidenceMap{0, 1}, UniswapGain{100.0, 100.0, 1.5}, 1.0),
               std::invalid_argument);  // fee > 1
  EXPECT_THROW(GainEdge(IncidenceMap{0, 1}, UniswapGain{100.0, 100.0, 0.997},
                        kInf),
               std::invalid_argument);  // infinite ub
  EXPECT_THROW(GainEdge(IncidenceMap{0, 1, 2}, LosslessGain{1e-6}, 1.0),
               std::invalid_argument);  // three-node map on a gain edge
}

TEST(BoxHyperEdgeValidation, BoundsMustStraddleZero) {
  EXPECT_THROW(HyperEdge(IncidenceMap{0, 1}, BoxHyperEdge{{0.5, -1.0}, {1.0, 1.0}}),
               std::invalid_argument);
  EXPECT_THROW(HyperEdge(IncidenceMap{0, 1}, BoxHyperEdge{{-1.0}, {1.0, 1.0}}),
               std::invalid_argument);
}
