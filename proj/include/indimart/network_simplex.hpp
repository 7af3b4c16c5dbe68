#pragma once

// Primal network simplex for the balanced transportation problem
//
//   min  sum_ij cost(i,j) * flow(i,j)
//   s.t. sum_j flow(i,j) = supply(i),  sum_i flow(i,j) = demand(j),  flow >= 0
//
// on the complete bipartite graph. Flows are real valued. The spanning tree is
// kept strongly feasible (leaving arc chosen as the last blocking arc on the
// pivot cycle), which rules out cycling on degenerate pivots. Entering arcs are
// priced by block search.

#include <cstddef>
#include <span>
#include <vector>

namespace indimart {

struct TransportFlow {
  std::size_t source;
  std::size_t target;
  double mass;
};

struct TransportSolution {
  std::vector<TransportFlow> flows;  // strictly positive, sorted by (source, target)
  double cost = 0.0;
  std::size_t pivots = 0;
};

// `cost` is row-major, supply.size() x demand.size(). Supplies and demands
// must be positive and balanced to within 1e-9.
TransportSolution solve_transport(std::span<const double> supply,
                                  std::span<const double> demand,
                                  std::span<const double> cost);

}  // namespace indimart
