#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "convexflows/edges.hpp"
#include "convexflows/incidence.hpp"
#include "convexflows/objectives.hpp"

namespace convexflows {

// One flow vector per edge, in edge-index order.
using FlowVector = std::vector<std::vector<double>>;

// A full problem instance: hypergraph topology, network objective and
// optional per-edge objectives. The node count is self-describing so that
// isolated nodes are representable. Immutable after construction by
// convention; everything here is safely shareable across threads.
struct Problem {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  ObjectiveAtom objective;
  // One entry per edge when present; absent means V_i == 0 throughout.
  std::optional<std::vector<EdgeObjectiveAtom>> edge_objectives;
  // Free-form provenance note carried through serialization (generators
  // record their arguments and seed here).
  std::string comment;

  std::size_t num_edges() const { return edges.size(); }

  const EdgeObjectiveAtom& edge_objective(std::size_t i) const {
    static const EdgeObjectiveAtom zero = ZeroEdgeObjective{};
    return edge_objectives ? (*edge_objectives)[i] : zero;
  }

  bool has_nonzero_edge_objective() const {
    if (!edge_objectives) return false;
    for (const auto& atom : *edge_objectives) {
      if (!is_zero_objective(atom)) return true;
    }
    return false;
  }
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;

  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate(const Problem& problem) {
  ValidationReport report;
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

  if (problem.num_nodes == 0) fail("problem has no nodes");

  if (atom_dim(problem.objective) != problem.num_nodes) {
    fail("objective dimension " + std::to_string(atom_dim(problem.objective)) +
         " does not match node count " + std::to_string(problem.num_nodes));
  }

  std::vector<bool> touched(problem.num_nodes, false);
  for (std::size_t i = 0; i < problem.edges.size(); ++i) {
    const IncidenceMap& map = edge_map(problem.edges[i]);
    for (std::size_t k = 0; k < map.dim(); ++k) {
      const NodeIndex j = map.node(k);
      if (j >= problem.num_nodes) {
        fail("edge " + std::to_string(i) + ": node index " +
             std::to_string(j) + " out of range");
      } else {
        touched[j] = true;
      }
      for (std::size_t l = k + 1; l < map.dim(); ++l) {
        if (map.node(l) == j) {
          fail("edge " + std::to_string(i) + ": duplicate node in edge");
        }
      }
    }
  }

  if (problem.edge_objectives &&
      problem.edge_objectives->size() != problem.edges.size()) {
    fail("edge_objectives has " +
         std::to_string(problem.edge_objectives->size()) + " entries for " +
         std::to_string(problem.edges.size()) + " edges");
  }

  for (std::size_t j = 0; j < touched.size(); ++j) {
    if (!touched[j]) {
      report.warnings.push_back("node " + std::to_string(j) +
                                " is not incident to any edge");
    }
  }
  return report;
}

// y = sum_i A_i x_i, accumulated in edge-index order for bit reproducibility.
inline std::vector<double> net_flow(const FlowVector& flows,
                                    const Problem& problem) {
  if (flows.size() != problem.edges.size()) {
    throw std::invalid_argument("net_flow: one flow per edge required");
  }
  std::vector<double> y(problem.num_nodes, 0.0);
  for (std::size_t i = 0; i < flows.size(); ++i) {
    scatter_accumulate(flows[i], edge_map(problem.edges[i]), y);
  }
  return y;
}

// Primal objective of a recovered point: U(y) + sum_i V_i(x_i).
inline double primal_objective(const Problem& problem, const FlowVector& flows,
                               std::span<const double> y) {
  double val = u_eval(problem.objective, y);
  if (problem.edge_objectives) {
    for (std::size_t i = 0; i < flows.size(); ++i) {
      val += v_eval(problem.edge_objective(i), flows[i]);
    }
  }
  return val;
}

// Primal objective with a roundoff-scale feasibility allowance on the
// objective's implicit constraints: a recovered point is evaluated at its
// projection onto dom U when the projection can overstate the utility by at
// most ~1e-10 of its magnitude (so weak-duality reporting stays intact).
// Everything else stays -inf. u_eval itself remains exact.
inline double primal_objective_feastol(const Problem& problem,
                                       const FlowVector& flows,
                                       std::span<const double> y) {
  const double exact = primal_objective(problem, flows, y);
  if (exact > -kInf) return exact;

  std::vector<double> projected(y.begin(), y.end());
  double overstatement = 0.0;
  if (std::holds_alternative<LinearAtom>(problem.objective)) {
    const auto& a = std::get<LinearAtom>(problem.objective);
    for (std::size_t j = 0; j < projected.size(); ++j) {
      if (projected[j] < 0.0) {
        overstatement += a.prices[j] * -projected[j];
        projected[j] = 0.0;
      }
    }
  } else if (std::holds_alternative<FisherBudgetAtom>(problem.objective)) {
    const auto& a = std::get<FisherBudgetAtom>(problem.objective);
    for (std::size_t i = 0; i < a.num_buyers; ++i) {
      if (projected[i] <= 0.0) return -kInf;  // no allowance on the log side
    }
    for (std::size_t g = 0; g < a.num_goods; ++g) {
      double& yg = projected[a.num_buyers + g];
      if (yg < -1.0) {
        // overselling a good inflates buyer utilities at the good's marginal
        // rate; bound that rate crudely rather than by the tiny regularizer
        overstatement += 4.0 * (-1.0 - yg);
        yg = -1.0;
      }
    }
  } else {
    return -kInf;  // quadratic atom has no implicit box; custom is unknown
  }

  double val = u_eval(problem.objective, projected);
  if (problem.edge_objectives) {
    for (std::size_t i = 0; i < flows.size(); ++i) {
      val += v_eval(problem.edge_objective(i), flows[i]);
    }
  }
  // Half the weak-duality reporting slack of 1e-9 max(1,|g|); the dual and
  // primal magnitudes agree at the points where this matters.
  if (!(overstatement <= 5e-10 * std::max(1.0, std::abs(val)))) return -kInf;
  return val;
}

}  // namespace convexflows
