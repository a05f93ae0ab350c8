// Finds arbitrage across a random network of markets and prints the
// recovered net trade.

#include <iostream>

#include "convexflows/convexflows.hpp"

using namespace convexflows;

int main() {
  const Problem problem = generate_cfmm(25, /*seed=*/7);

  SolverConfig config;
  config.tol_gap = 1e-8;
  config.max_iter = 2000;
  const SolveResult result = solve(problem, config);

  std::cout << "status=" << to_string(result.status)
            << " rel_gap=" << result.rel_gap
            << " profit=" << result.primal_value << "\n";
  std::cout << "net trade y_hat:\n";
  for (std::size_t j = 0; j < result.y_hat.size(); ++j) {
    if (std::abs(result.y_hat[j]) > 1e-9) {
      std::cout << "  asset " << j << ": " << result.y_hat[j] << "\n";
    }
  }
  return 0;
}
