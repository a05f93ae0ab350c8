#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "convexflows/problem.hpp"
#include "convexflows/solver.hpp"

namespace convexflows {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

// Strict object reader: every key must be consumed, unknown keys are
// rejected, and all errors carry the JSON path.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
      throw ParseError(path_ + ": expected an object");
    }
  }

  const json& require(const std::string& key) {
    const json* v = optional(key);
    if (!v) throw ParseError(path_ + "." + key + ": missing required key");
    return *v;
  }

  const json* optional(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw ParseError(path_ + "." + it.key() + ": unknown key");
      }
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

inline double finite_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ParseError(path + ": number must be finite");
  return x;
}

inline std::size_t nonneg_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ParseError(path + ": expected a nonnegative integer");
  }
  return static_cast<std::size_t>(v.get<long long>());
}

inline std::vector<double> number_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path + ": expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(finite_number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline IncidenceMap nodes_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path + ": expected an array");
  std::vector<NodeIndex> nodes;
  nodes.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    nodes.push_back(nonneg_integer(v[i], path + "[" + std::to_string(i) + "]"));
  }
  try {
    return IncidenceMap(std::move(nodes));
  } catch (const std::invalid_argument& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline ObjectiveAtom objective_from_json(const json& node,
                                         const std::string& path) {
  ObjectReader obj(node, path);
  const json& type = obj.require("type");
  if (!type.is_string()) throw ParseError(path + ".type: expected a string");
  const std::string kind = type.get<std::string>();
  try {
    if (kind == "linear") {
      auto c = number_array(obj.require("c"), path + ".c");
      obj.finish();
      return LinearAtom(std::move(c));
    }
    if (kind == "nonpositive_quadratic") {
      auto d = number_array(obj.require("d"), path + ".d");
      auto kappa = number_array(obj.require("kappa"), path + ".kappa");
      obj.finish();
      return NonpositiveQuadraticAtom(std::move(d), std::move(kappa));
    }
    if (kind == "fisher") {
      auto budgets = number_array(obj.require("budgets"), path + ".budgets");
      const std::size_t nb =
          nonneg_integer(obj.require("num_buyers"), path + ".num_buyers");
      const std::size_t ng =
          nonneg_integer(obj.require("num_goods"), path + ".num_goods");
      double eps = 1e-8;
      if (const json* e = obj.optional("eps_good")) {
        eps = finite_number(*e, path + ".eps_good");
      }
      obj.finish();
      return FisherBudgetAtom(std::move(budgets), nb, ng, eps);
    }
  } catch (const std::invalid_argument& e) {
    throw ParseError(path + ": " + e.what());
  }
  throw ParseError(path + ".type: unknown objective type '" + kind + "'");
}

inline Edge edge_from_json(const json& node, const std::string& path) {
  ObjectReader obj(node, path);
  const json& type = obj.require("type");
  if (!type.is_string()) throw ParseError(path + ".type: expected a string");
  const std::string kind = type.get<std::string>();

  IncidenceMap map = nodes_array(obj.require("nodes"), path + ".nodes");

  auto positive = [&](const char* key) {
    const double x = finite_number(obj.require(key), path + "." + key);
    if (!(x > 0.0)) throw ParseError(path + "." + key + ": must be positive");
    return x;
  };
  auto fee_value = [&]() {
    const double f = finite_number(obj.require("fee"), path + ".fee");
    if (!(f > 0.0) || f > 1.0) {
      throw ParseError(path + ".fee: must lie in (0, 1]");
    }
    return f;
  };

  try {
    if (kind == "box") {
      auto lower = number_array(obj.require("l"), path + ".l");
      auto upper = number_array(obj.require("u"), path + ".u");
      obj.finish();
      return HyperEdge(std::move(map),
                       BoxHyperEdge{std::move(lower), std::move(upper)});
    }
    if (kind == "powerline") {
      const double alpha = positive("alpha");
      const double beta = positive("beta");
      const double ub = positive("ub");
      obj.finish();
      return GainEdge(std::move(map), PowerLineGain{alpha, beta}, ub);
    }
    if (kind == "storage") {
      const double gamma = positive("gamma");
      const double eps = positive("epsilon");
      const double ub = positive("ub");
      obj.finish();
      return GainEdge(std::move(map), StorageGain{gamma, eps}, ub);
    }
    if (kind == "lossless") {
      const double eps = positive("epsilon");
      const double ub = positive("ub");
      obj.finish();
      return GainEdge(std::move(map), LosslessGain{eps}, ub);
    }
    if (kind == "uniswap") {
      auto reserves = number_array(obj.require("R"), path + ".R");
      if (reserves.size() != 2) {
        throw ParseError(path + ".R: expected two reserves");
      }
      const double fee = fee_value();
      const double ub = positive("ub");
      obj.finish();
      return GainEdge(std::move(map),
                      UniswapGain{reserves[0], reserves[1], fee}, ub);
    }
    if (kind == "balancer2") {
      auto reserves = number_array(obj.require("R"), path + ".R");
      if (reserves.size() != 2) {
        throw ParseError(path + ".R: expected two reserves");
      }
      const double weight = finite_number(obj.require("weight"), path + ".weight");
      const double fee = fee_value();
      const double ub = positive("ub");
      obj.finish();
      return GainEdge(std::move(map),
                      BalancerTwoGain{reserves[0], reserves[1], weight, fee},
                      ub);
    }
    if (kind == "sqrt") {
      const double b = positive("b");
      const double g = positive("g");
      const double ub = positive("ub");
      obj.finish();
      return GainEdge(std::move(map), SqrtGain{b, g}, ub);
    }
  } catch (const std::invalid_argument& e) {
    throw ParseError(path + ": " + e.what());
  }
  throw ParseError(path + ".type: unknown edge type '" + kind + "'");
}

inline EdgeObjectiveAtom edge_objective_from_json(const json& node,
                                                  const std::string& path) {
  ObjectReader obj(node, path);
  const json& type = obj.require("type");
  if (!type.is_string()) throw ParseError(path + ".type: expected a string");
  const std::string kind = type.get<std::string>();
  obj.finish();
  if (kind == "zero") return ZeroEdgeObjective{};
  if (kind == "negpart_quadratic") return NegPartQuadraticEdgeObjective{};
  throw ParseError(path + ".type: unknown edge objective type '" + kind + "'");
}

inline json objective_to_json(const ObjectiveAtom& atom) {
  json out;
  if (std::holds_alternative<LinearAtom>(atom)) {
    out["type"] = "linear";
    out["c"] = std::get<LinearAtom>(atom).prices;
  } else if (std::holds_alternative<NonpositiveQuadraticAtom>(atom)) {
    const auto& a = std::get<NonpositiveQuadraticAtom>(atom);
    out["type"] = "nonpositive_quadratic";
    out["d"] = a.demand;
    out["kappa"] = a.kappa;
  } else if (std::holds_alternative<FisherBudgetAtom>(atom)) {
    const auto& a = std::get<FisherBudgetAtom>(atom);
    out["type"] = "fisher";
    out["budgets"] = a.budgets;
    out["num_buyers"] = a.num_buyers;
    out["num_goods"] = a.num_goods;
    out["eps_good"] = a.eps_good;
  } else {
    throw std::invalid_argument("cannot serialize a custom objective");
  }
  return out;
}

inline json edge_to_json(const Edge& edge) {
  json out;
  out["nodes"] = edge_map(edge).nodes();
  if (std::holds_alternative<HyperEdge>(edge)) {
    const auto& he = std::get<HyperEdge>(edge);
    if (!he.is_box()) {
      throw std::invalid_argument("cannot serialize a custom hyperedge");
    }
    out["type"] = "box";
    out["l"] = he.box().lower;
    out["u"] = he.box().upper;
    return out;
  }
  const auto& ge = std::get<GainEdge>(edge);
  out["ub"] = ge.ub();
  const GainFamily& fam = ge.family();
  if (std::holds_alternative<PowerLineGain>(fam)) {
    const auto& f = std::get<PowerLineGain>(fam);
    out["type"] = "powerline";
    out["alpha"] = f.alpha;
    out["beta"] = f.beta;
  } else if (std::holds_alternative<StorageGain>(fam)) {
    const auto& f = std::get<StorageGain>(fam);
    out["type"] = "storage";
    out["gamma"] = f.gamma_s;
    out["epsilon"] = f.eps_reg;
  } else if (std::holds_alternative<LosslessGain>(fam)) {
    out["type"] = "lossless";
    out["epsilon"] = std::get<LosslessGain>(fam).eps_reg;
  } else if (std::holds_alternative<UniswapGain>(fam)) {
    const auto& f = std::get<UniswapGain>(fam);
    out["type"] = "uniswap";
    out["R"] = {f.r1, f.r2};
    out["fee"] = f.fee;
  } else if (std::holds_alternative<BalancerTwoGain>(fam)) {
    const auto& f = std::get<BalancerTwoGain>(fam);
    out["type"] = "balancer2";
    out["R"] = {f.r1, f.r2};
    out["weight"] = f.weight;
    out["fee"] = f.fee;
  } else if (std::holds_alternative<SqrtGain>(fam)) {
    const auto& f = std::get<SqrtGain>(fam);
    out["type"] = "sqrt";
    out["b"] = f.b;
    out["g"] = f.g;
  } else {
    throw std::invalid_argument("cannot serialize a custom gain edge");
  }
  return out;
}

inline std::string csv_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace detail

inline nlohmann::json problem_to_json(const Problem& problem) {
  nlohmann::json out;
  if (!problem.comment.empty()) out["comment"] = problem.comment;
  out["nodes"] = problem.num_nodes;
  out["objective"] = detail::objective_to_json(problem.objective);
  out["edges"] = nlohmann::json::array();
  for (const Edge& e : problem.edges) {
    out["edges"].push_back(detail::edge_to_json(e));
  }
  if (problem.edge_objectives) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& atom : *problem.edge_objectives) {
      nlohmann::json o;
      if (std::holds_alternative<ZeroEdgeObjective>(atom)) {
        o["type"] = "zero";
      } else if (std::holds_alternative<NegPartQuadraticEdgeObjective>(atom)) {
        o["type"] = "negpart_quadratic";
      } else {
        throw std::invalid_argument("cannot serialize a custom edge objective");
      }
      arr.push_back(std::move(o));
    }
    out["edge_objectives"] = std::move(arr);
  }
  return out;
}

// Canonical bytes: alphabetical key order and shortest round-trip floats,
// so generate -> serialize -> parse -> re-serialize is byte-identical.
inline std::string serialize_problem(const Problem& problem) {
  return problem_to_json(problem).dump(2) + "\n";
}

inline Problem problem_from_json(const nlohmann::json& doc) {
  detail::ObjectReader root(doc, "$");
  Problem problem;
  if (const nlohmann::json* c = root.optional("comment")) {
    if (!c->is_string()) throw ParseError("$.comment: expected a string");
    problem.comment = c->get<std::string>();
  }
  problem.num_nodes = detail::nonneg_integer(root.require("nodes"), "$.nodes");
  problem.objective =
      detail::objective_from_json(root.require("objective"), "$.objective");
  const nlohmann::json& edges = root.require("edges");
  if (!edges.is_array()) throw ParseError("$.edges: expected an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    problem.edges.push_back(detail::edge_from_json(
        edges[i], "$.edges[" + std::to_string(i) + "]"));
  }
  if (const nlohmann::json* eo = root.optional("edge_objectives")) {
    if (!eo->is_array()) {
      throw ParseError("$.edge_objectives: expected an array");
    }
    std::vector<EdgeObjectiveAtom> atoms;
    for (std::size_t i = 0; i < eo->size(); ++i) {
      atoms.push_back(detail::edge_objective_from_json(
          (*eo)[i], "$.edge_objectives[" + std::to_string(i) + "]"));
    }
    problem.edge_objectives = std::move(atoms);
  }
  root.finish();

  const ValidationReport report = validate(problem);
  if (!report.ok()) throw ParseError(report.violations.front());
  return problem;
}

inline Problem parse_problem_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return problem_from_json(doc);
}

inline Problem parse_problem(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_problem_text(buffer.str());
}

// All file emission is atomic: write to a sibling temp file, then rename.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_problem(const std::filesystem::path& path,
                          const Problem& problem) {
  write_file_atomic(path, serialize_problem(problem));
}

inline nlohmann::json result_to_json(const SolveResult& result) {
  nlohmann::json out;
  out["status"] = to_string(result.status);
  out["dual_value"] = result.dual_value;
  out["primal_value"] = result.primal_value;
  out["relative_gap"] = result.rel_gap;
  out["nu"] = result.nu;
  out["y_hat"] = result.y_hat;
  out["flows"] = result.flows;
  out["iterations"] = result.iterations;
  out["wall_time_seconds"] = result.wall_time_s;
  return out;
}

inline void write_result(const std::filesystem::path& path,
                         const SolveResult& result) {
  write_file_atomic(path, result_to_json(result).dump(2) + "\n");
}

inline std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::string out = "iter,g,grad_inf,rel_gap,primal_resid,step,time_s\n";
  for (const TraceRow& row : trace) {
    out += std::to_string(row.iter);
    out += ',';
    out += detail::csv_double(row.g);
    out += ',';
    out += detail::csv_double(row.grad_inf);
    out += ',';
    out += detail::csv_double(row.rel_gap);
    out += ',';
    out += detail::csv_double(row.primal_resid);
    out += ',';
    out += detail::csv_double(row.step);
    out += ',';
    out += detail::csv_double(row.time_s);
    out += '\n';
  }
  return out;
}

inline void write_trace(const std::filesystem::path& path,
                        const std::vector<TraceRow>& trace) {
  write_file_atomic(path, trace_to_csv(trace));
}

}  // namespace convexflows
