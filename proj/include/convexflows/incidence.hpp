#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace convexflows {

using NodeIndex = std::size_t;

// Maps an edge's local flow slots to global node indices. This is the 0/1
// selector matrix of the problem statement stored as an index list, so
// gather and scatter run in O(n_i) instead of O(n * n_i).
class IncidenceMap {
 public:
  IncidenceMap() = default;

  // Degenerate one-node "edges" are rejected outright; duplicate global
  // nodes are reported by problem validation rather than here.
  explicit IncidenceMap(std::vector<NodeIndex> global_nodes)
      : global_nodes_(std::move(global_nodes)) {
    if (global_nodes_.size() < 2) {
      throw std::invalid_argument(
          "IncidenceMap: an edge must touch at least two nodes");
    }
  }

  IncidenceMap(std::initializer_list<NodeIndex> nodes)
      : IncidenceMap(std::vector<NodeIndex>(nodes)) {}

  std::size_t dim() const { return global_nodes_.size(); }
  NodeIndex node(std::size_t slot) const { return global_nodes_[slot]; }
  const std::vector<NodeIndex>& nodes() const { return global_nodes_; }

  bool valid_for(std::size_t num_nodes) const {
    for (NodeIndex j : global_nodes_) {
      if (j >= num_nodes) return false;
    }
    return true;
  }

 private:
  std::vector<NodeIndex> global_nodes_;
};

// eta_k = nu[global_nodes[k]]; pure selection, no arithmetic.
inline void gather_local(std::span<const double> nu, const IncidenceMap& map,
                         std::span<double> out) {
  for (std::size_t k = 0; k < map.dim(); ++k) {
    const NodeIndex j = map.node(k);
    if (j >= nu.size()) {
      throw std::out_of_range("gather_local: node index out of range");
    }
    out[k] = nu[j];
  }
}

inline std::vector<double> gather_local(std::span<const double> nu,
                                        const IncidenceMap& map) {
  std::vector<double> out(map.dim());
  gather_local(nu, map, out);
  return out;
}

// y[global_nodes[k]] += x[k]. Callers accumulate edges in edge-index order;
// that fixed order is what makes net flows bit-reproducible.
inline void scatter_accumulate(std::span<const double> x,
                               const IncidenceMap& map, std::span<double> y) {
  if (x.size() != map.dim()) {
    throw std::invalid_argument("scatter_accumulate: flow dimension mismatch");
  }
  for (std::size_t k = 0; k < map.dim(); ++k) {
    const NodeIndex j = map.node(k);
    if (j >= y.size()) {
      throw std::out_of_range("scatter_accumulate: node index out of range");
    }
    y[j] += x[k];
  }
}

}  // namespace convexflows
