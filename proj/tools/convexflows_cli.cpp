// Batch front end: parse problem files, generate the experiment families,
// run the solver, and emit result/trace files.
//
// Exit codes: 0 optimal, 2 iteration limit, 3 line search failure,
// 4 invalid input.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "convexflows/convexflows.hpp"

namespace {

int default_threads() {
  if (const char* env = std::getenv("CONVEXFLOWS_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
    std::cerr << "warning: ignoring malformed CONVEXFLOWS_THREADS\n";
  }
  return 1;
}

int exit_code_for(convexflows::SolveStatus status) {
  switch (status) {
    case convexflows::SolveStatus::kOptimal: return 0;
    case convexflows::SolveStatus::kMaxIter: return 2;
    case convexflows::SolveStatus::kLineSearchFailure: return 3;
    case convexflows::SolveStatus::kInvalidProblem: return 4;
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convexflows: convex network flow solver"};
  app.require_subcommand(1);

  // ---- solve ----
  std::string problem_path;
  std::string out_path;
  std::string trace_path;
  double tol_gap = 1e-7;
  double tol_grad = 1e-8;
  int max_iters = 1000;
  std::string mode = "auto";
  int threads = default_threads();
  std::uint64_t solve_seed = 0;

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve a problem file");
  solve_cmd->add_option("problem", problem_path, "problem JSON file")
      ->required();
  solve_cmd->add_option("--out", out_path, "result JSON file");
  solve_cmd->add_option("--trace", trace_path, "trace CSV file");
  solve_cmd->add_option("--tol-gap", tol_gap, "relative duality gap tolerance");
  solve_cmd->add_option("--tol-grad", tol_grad, "relative gradient tolerance");
  solve_cmd->add_option("--max-iters", max_iters, "iteration limit");
  solve_cmd->add_option("--mode", mode, "auto|reduced|extended")
      ->check(CLI::IsMember({"auto", "reduced", "extended"}));
  solve_cmd->add_option("--threads", threads, "edge sweep worker count");
  solve_cmd->add_option("--seed", solve_seed, "reserved; solves are deterministic");

  // ---- generate ----
  CLI::App* gen_cmd = app.add_subcommand("generate", "generate an instance");
  gen_cmd->require_subcommand(1);

  std::size_t opf_n = 100;
  std::size_t opf_T = 1;
  std::uint64_t opf_seed = 0;
  bool opf_preset = false;
  std::string opf_out;
  CLI::App* opf_cmd = gen_cmd->add_subcommand("opf", "optimal power flow");
  opf_cmd->add_option("--n", opf_n, "nodes per time slice");
  opf_cmd->add_option("--periods", opf_T, "time slices T");
  opf_cmd->add_option("--seed", opf_seed, "rng seed");
  opf_cmd->add_flag("--three-node-preset", opf_preset,
                    "fixed 3-node battery scenario (requires --n 3)");
  opf_cmd->add_option("--out", opf_out, "output problem JSON")->required();

  std::size_t cfmm_m = 100;
  std::uint64_t cfmm_seed = 0;
  bool cfmm_penalties = false;
  double cfmm_fee = 0.997;
  std::string cfmm_out;
  CLI::App* cfmm_cmd = gen_cmd->add_subcommand("cfmm", "market routing");
  cfmm_cmd->add_option("--m", cfmm_m, "market count");
  cfmm_cmd->add_option("--seed", cfmm_seed, "rng seed");
  cfmm_cmd->add_option("--fee", cfmm_fee, "trading fee in (0,1]");
  cfmm_cmd->add_flag("--penalties", cfmm_penalties,
                     "attach quadratic tendered-flow edge penalties");
  cfmm_cmd->add_option("--out", cfmm_out, "output problem JSON")->required();

  std::size_t fisher_buyers = 5;
  std::size_t fisher_goods = 5;
  std::uint64_t fisher_seed = 0;
  std::string fisher_out;
  CLI::App* fisher_cmd = gen_cmd->add_subcommand("fisher", "market clearing");
  fisher_cmd->add_option("--buyers", fisher_buyers, "buyer count");
  fisher_cmd->add_option("--goods", fisher_goods, "good count");
  fisher_cmd->add_option("--seed", fisher_seed, "rng seed");
  fisher_cmd->add_option("--out", fisher_out, "output problem JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed()) {
      convexflows::Problem problem;
      try {
        problem = convexflows::parse_problem(problem_path);
      } catch (const convexflows::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
      }
      convexflows::SolverConfig config;
      config.tol_gap = tol_gap;
      config.tol_grad = tol_grad;
      config.max_iter = max_iters;
      config.threads = threads;
      if (mode == "reduced") config.mode = convexflows::SolveMode::kReduced;
      if (mode == "extended") config.mode = convexflows::SolveMode::kExtended;

      const convexflows::SolveResult result = convexflows::solve(problem, config);
      if (!out_path.empty()) convexflows::write_result(out_path, result);
      if (!trace_path.empty()) convexflows::write_trace(trace_path, result.trace);
      if (result.status == convexflows::SolveStatus::kInvalidProblem) {
        std::cerr << "error: " << result.message << "\n";
      } else {
        std::cerr << "status=" << convexflows::to_string(result.status)
                  << " dual=" << result.dual_value
                  << " rel_gap=" << result.rel_gap
                  << " iters=" << result.iterations << "\n";
      }
      return exit_code_for(result.status);
    }

    convexflows::Problem problem;
    std::string out;
    if (opf_cmd->parsed()) {
      problem = convexflows::generate_opf(opf_n, opf_T, opf_seed, opf_preset);
      out = opf_out;
    } else if (cfmm_cmd->parsed()) {
      problem = convexflows::generate_cfmm(cfmm_m, cfmm_seed, cfmm_penalties,
                                           cfmm_fee);
      out = cfmm_out;
    } else {
      problem = convexflows::generate_fisher(fisher_buyers, fisher_goods,
                                             fisher_seed);
      out = fisher_out;
    }
    convexflows::write_problem(out, problem);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
