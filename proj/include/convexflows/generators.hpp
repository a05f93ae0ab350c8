#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "convexflows/problem.hpp"
#include "convexflows/rng.hpp"

namespace convexflows {

namespace detail {

inline std::string short_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace detail

// Power network over n nodes and T time slices. Topology is a stand-in for
// the usual proximity construction: every node links to its 3 nearest
// neighbors in the unit square, plus ceil(0.05 n) random long lines; each
// undirected line becomes two directed edges per time slice. Lines use the
// logarithmic-loss gain with alpha=16, beta=1/4 and capacity drawn from
// {1,2,3}. Demands come from {0.5,1,2} for T=1 and uniformly from [1,5] per
// node and slice otherwise. Nodes store power across consecutive slices with
// probability 1/2, efficiency uniform in [0.5,1], capacity 10.
//
// With three_node_preset the instance is instead the fixed battery scenario:
// two users with sinusoidal daily demand and expensive generation
// (kappa=100), one cheap generator (kappa=1), one line from the generator to
// each user per slice, and a perfect-efficiency battery on the second user.
inline Problem generate_opf(std::size_t n, std::size_t T, std::uint64_t seed,
                            bool three_node_preset = false) {
  if (n < 2 || T < 1) {
    throw std::invalid_argument("generate_opf: need n >= 2 and T >= 1");
  }
  Problem problem;
  problem.num_nodes = n * T;

  const double alpha = 16.0;
  const double beta = 0.25;
  const double storage_eps = 1e-2;
  const double storage_capacity = 10.0;

  if (three_node_preset) {
    if (n != 3) {
      throw std::invalid_argument(
          "generate_opf: the three-node preset requires n = 3");
    }
    std::vector<double> demand(3 * T, 0.0);
    std::vector<double> kappa(3 * T, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
      const double d_user =
          std::sin(2.0 * M_PI * static_cast<double>(t + 1) / 24.0) + 1.5;
      demand[t * 3 + 0] = d_user;
      demand[t * 3 + 1] = d_user;
      kappa[t * 3 + 0] = 100.0;
      kappa[t * 3 + 1] = 100.0;
      kappa[t * 3 + 2] = 1.0;
    }
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t user = 0; user < 2; ++user) {
        problem.edges.emplace_back(
            GainEdge(IncidenceMap{t * 3 + 2, t * 3 + user},
                     PowerLineGain{alpha, beta}, 4.0));
      }
    }
    for (std::size_t t = 0; t + 1 < T; ++t) {
      problem.edges.emplace_back(
          GainEdge(IncidenceMap{t * 3 + 1, (t + 1) * 3 + 1},
                   StorageGain{1.0, storage_eps}, storage_capacity));
    }
    problem.objective = NonpositiveQuadraticAtom(std::move(demand),
                                                 std::move(kappa));
    problem.comment = "convexflows generate opf preset=three-node T=" +
                      std::to_string(T) + " seed=" + std::to_string(seed) +
                      " rng=xoshiro256**";
    return problem;
  }

  Xoshiro256ss rng(seed);

  std::vector<double> px(n), py(n);
  for (std::size_t j = 0; j < n; ++j) {
    px[j] = rng.uniform();
    py[j] = rng.uniform();
  }

  std::set<std::pair<std::size_t, std::size_t>> lines;
  auto dist2 = [&](std::size_t a, std::size_t b) {
    const double dx = px[a] - px[b];
    const double dy = py[a] - py[b];
    return dx * dx + dy * dy;
  };
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
      if (k != j) order.push_back(k);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = dist2(j, a);
      const double db = dist2(j, b);
      return da != db ? da < db : a < b;
    });
    for (std::size_t k = 0; k < std::min<std::size_t>(3, order.size()); ++k) {
      lines.insert({std::min(j, order[k]), std::max(j, order[k])});
    }
  }
  const std::size_t num_long =
      static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n)));
  std::size_t added = 0;
  while (added < num_long) {
    const std::size_t a = rng.below(n);
    const std::size_t b = rng.below(n);
    if (a == b) continue;
    if (lines.insert({std::min(a, b), std::max(a, b)}).second) ++added;
  }

  static const double kCapacities[3] = {1.0, 2.0, 3.0};
  std::vector<double> line_capacity;
  line_capacity.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    line_capacity.push_back(kCapacities[rng.below(3)]);
  }

  std::vector<double> demand(n * T);
  if (T == 1) {
    static const double kDemands[3] = {0.5, 1.0, 2.0};
    for (std::size_t j = 0; j < n; ++j) demand[j] = kDemands[rng.below(3)];
  } else {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < n; ++j) {
        demand[t * n + j] = rng.uniform(1.0, 5.0);
      }
    }
  }

  std::vector<std::size_t> storage_nodes;
  std::vector<double> storage_gamma;
  for (std::size_t j = 0; j < n; ++j) {
    if (rng.uniform() < 0.5) {
      storage_nodes.push_back(j);
      storage_gamma.push_back(rng.uniform(0.5, 1.0));
    }
  }

  for (std::size_t t = 0; t < T; ++t) {
    std::size_t line_index = 0;
    for (const auto& [j, k] : lines) {
      const double ub = line_capacity[line_index++];
      problem.edges.emplace_back(GainEdge(IncidenceMap{t * n + j, t * n + k},
                                          PowerLineGain{alpha, beta}, ub));
      problem.edges.emplace_back(GainEdge(IncidenceMap{t * n + k, t * n + j},
                                          PowerLineGain{alpha, beta}, ub));
    }
  }
  for (std::size_t s = 0; s < storage_nodes.size(); ++s) {
    const std::size_t j = storage_nodes[s];
    for (std::size_t t = 0; t + 1 < T; ++t) {
      problem.edges.emplace_back(
          GainEdge(IncidenceMap{t * n + j, (t + 1) * n + j},
                   StorageGain{storage_gamma[s], storage_eps},
                   storage_capacity));
    }
  }

  problem.objective = NonpositiveQuadraticAtom(
      std::move(demand), std::vector<double>(n * T, 1.0));
  problem.comment = "convexflows generate opf n=" + std::to_string(n) +
                    " T=" + std::to_string(T) +
                    " seed=" + std::to_string(seed) + " rng=xoshiro256**";
  return problem;
}

// Market network: m constant-function markets over ceil(2 sqrt(m)) assets.
// Each market is Uniswap-like or a two-asset weighted market with equal
// probability, reserves uniform in [100, 200], and emits one directed gain
// edge per trade direction. The objective values every asset at one (pure
// arbitrage); with_penalties attaches the quadratic tendered-flow penalty to
// every edge.
inline Problem generate_cfmm(std::size_t m, std::uint64_t seed,
                             bool with_penalties = false, double fee = 0.997) {
  if (m < 1) throw std::invalid_argument("generate_cfmm: need m >= 1");
  Problem problem;
  const std::size_t n = static_cast<std::size_t>(
      std::ceil(2.0 * std::sqrt(static_cast<double>(m))));
  problem.num_nodes = n;

  Xoshiro256ss rng(seed);
  const double ub = 1e6;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t a = rng.below(n);
    std::size_t b = rng.below(n);
    while (b == a) b = rng.below(n);
    const bool uniswap_like = rng.uniform() < 0.5;
    const double r1 = rng.uniform(100.0, 200.0);
    const double r2 = rng.uniform(100.0, 200.0);
    if (uniswap_like) {
      problem.edges.emplace_back(
          GainEdge(IncidenceMap{a, b}, UniswapGain{r1, r2, fee}, ub));
      problem.edges.emplace_back(
          GainEdge(IncidenceMap{b, a}, UniswapGain{r2, r1, fee}, ub));
    } else {
      problem.edges.emplace_back(GainEdge(
          IncidenceMap{a, b}, BalancerTwoGain{r1, r2, 0.8, fee}, ub));
      problem.edges.emplace_back(GainEdge(
          IncidenceMap{b, a}, BalancerTwoGain{r2, r1, 0.2, fee}, ub));
    }
  }

  problem.objective = LinearAtom(std::vector<double>(n, 1.0));
  if (with_penalties) {
    problem.edge_objectives.emplace(problem.edges.size(),
                                    NegPartQuadraticEdgeObjective{});
  }
  problem.comment = "convexflows generate cfmm m=" + std::to_string(m) +
                    " seed=" + std::to_string(seed) +
                    " fee=" + detail::short_double(fee) +
                    " penalties=" + (with_penalties ? "1" : "0") +
                    " rng=xoshiro256**";
  return problem;
}

// Market-clearing network: one square-root utility edge from every good to
// every buyer, h(x) = sqrt(b + g x) - sqrt(b) with b, g the 1-based buyer
// and good indices; budgets uniform in [1, 2]. Buyers occupy nodes
// [0, n_b), goods the rest; each good supplies at most one unit, enforced by
// the objective's good-side bound.
inline Problem generate_fisher(std::size_t n_b, std::size_t n_g,
                               std::uint64_t seed) {
  if (n_b < 1 || n_g < 1) {
    throw std::invalid_argument("generate_fisher: need n_b, n_g >= 1");
  }
  Problem problem;
  problem.num_nodes = n_b + n_g;

  Xoshiro256ss rng(seed);
  std::vector<double> budgets(n_b);
  for (std::size_t i = 0; i < n_b; ++i) budgets[i] = rng.uniform(1.0, 2.0);

  for (std::size_t b = 1; b <= n_b; ++b) {
    for (std::size_t g = 1; g <= n_g; ++g) {
      problem.edges.emplace_back(
          GainEdge(IncidenceMap{n_b + g - 1, b - 1},
                   SqrtGain{static_cast<double>(b), static_cast<double>(g)},
                   1.0));
    }
  }
  problem.objective = FisherBudgetAtom(std::move(budgets), n_b, n_g);
  problem.comment = "convexflows generate fisher buyers=" +
                    std::to_string(n_b) + " goods=" + std::to_string(n_g) +
                    " seed=" + std::to_string(seed) + " rng=xoshiro256**";
  return problem;
}

}  // namespace convexflows
