#include "indimart/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "indimart/errors.hpp"

namespace indimart {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand,
                 std::span<const double> cost)
      : n_(supply.size()),
        k_(demand.size()),
        root_(n_ + k_),
        nodes_(n_ + k_ + 1),
        bipartite_(n_ * k_) {
    const std::size_t arcs = bipartite_ + n_ + k_;
    cost_.assign(cost.begin(), cost.end());
    cost_.resize(arcs, 0.0);
    flow_.assign(arcs, 0.0);

    double max_cost = 0.0;
    for (std::size_t e = 0; e < bipartite_; ++e) max_cost = std::max(max_cost, std::abs(cost_[e]));
    const double artificial = (max_cost + 1.0) * static_cast<double>(nodes_);
    epsilon_ = 1e-12 * std::max(1.0, max_cost);

    parent_.assign(nodes_, kNone);
    pred_.assign(nodes_, kNone);
    up_.assign(nodes_, 0);
    depth_.assign(nodes_, 0);
    pi_.assign(nodes_, 0.0);

    // Sources hang off the root by arcs u -> root, sinks by root -> v.
    for (std::size_t u = 0; u < n_; ++u) {
      const std::size_t e = bipartite_ + u;
      cost_[e] = 0.0;
      flow_[e] = supply[u];
      parent_[u] = root_;
      pred_[u] = e;
      up_[u] = 1;
      depth_[u] = 1;
      pi_[u] = 0.0;
    }
    for (std::size_t j = 0; j < k_; ++j) {
      const std::size_t v = n_ + j;
      const std::size_t e = bipartite_ + v;
      cost_[e] = artificial;
      flow_[e] = demand[j];
      parent_[v] = root_;
      pred_[v] = e;
      up_[v] = 0;
      depth_[v] = 1;
      pi_[v] = artificial;
    }
    block_size_ = std::max<std::size_t>(
        10, static_cast<std::size_t>(std::sqrt(static_cast<double>(bipartite_))));
  }

  TransportSolution run() {
    TransportSolution out;
    const std::size_t max_pivots = 50 * (bipartite_ + nodes_) + 1000;
    while (true) {
      const std::size_t entering = find_entering();
      if (entering == kNone) break;
      pivot(entering);
      if (++out.pivots > max_pivots) {
        throw InvariantError("network simplex exceeded " + std::to_string(max_pivots) + " pivots");
      }
    }
    for (std::size_t u = 0; u < n_ + k_; ++u) {
      if (flow_[bipartite_ + u] > 1e-9) {
        throw InvariantError("transport problem is not balanced");
      }
    }
    for (std::size_t u = 0; u < n_ + k_; ++u) {
      const std::size_t e = pred_[u];
      if (e < bipartite_ && flow_[e] > kFlowFloor) {
        out.flows.push_back(TransportFlow{e / k_, e % k_, flow_[e]});
      }
    }
    std::sort(out.flows.begin(), out.flows.end(), [](const TransportFlow& a, const TransportFlow& b) {
      return a.source != b.source ? a.source < b.source : a.target < b.target;
    });
    for (const TransportFlow& f : out.flows) out.cost += f.mass * cost_[f.source * k_ + f.target];
    return out;
  }

 private:
  static constexpr double kFlowFloor = 1e-14;

  std::size_t arc_source(std::size_t e) const {
    if (e < bipartite_) return e / k_;
    const std::size_t u = e - bipartite_;
    return u < n_ ? u : root_;
  }
  std::size_t arc_target(std::size_t e) const {
    if (e < bipartite_) return n_ + e % k_;
    const std::size_t u = e - bipartite_;
    return u < n_ ? root_ : u;
  }
  double reduced_cost(std::size_t e) const {
    return cost_[e] + pi_[arc_source(e)] - pi_[arc_target(e)];
  }

  // Block search over the bipartite arcs, cyclically from the last position.
  std::size_t find_entering() {
    if (bipartite_ == 0) return kNone;
    std::size_t best = kNone;
    double best_rc = -epsilon_;
    std::size_t scanned_in_block = 0;
    for (std::size_t count = 0; count < bipartite_; ++count) {
      const std::size_t e = next_arc_;
      next_arc_ = next_arc_ + 1 == bipartite_ ? 0 : next_arc_ + 1;
      const double rc = reduced_cost(e);
      if (rc < best_rc) {
        best_rc = rc;
        best = e;
      }
      if (++scanned_in_block == block_size_) {
        if (best != kNone) return best;
        scanned_in_block = 0;
      }
    }
    return best;
  }

  void pivot(std::size_t entering) {
    const std::size_t first = arc_source(entering);
    const std::size_t second = arc_target(entering);

    std::size_t a = first;
    std::size_t b = second;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        a = parent_[a];
      } else {
        b = parent_[b];
      }
    }
    const std::size_t join = a;

    // Flow runs along the entering arc, up from `second` to the join and down
    // from the join to `first`.
    double delta = std::numeric_limits<double>::infinity();
    std::size_t leaving_node = kNone;
    for (std::size_t u = first; u != join; u = parent_[u]) {
      if (up_[u] && flow_[pred_[u]] < delta) {
        delta = flow_[pred_[u]];
        leaving_node = u;
      }
    }
    for (std::size_t u = second; u != join; u = parent_[u]) {
      if (!up_[u] && flow_[pred_[u]] <= delta) {
        delta = flow_[pred_[u]];
        leaving_node = u;
      }
    }
    if (leaving_node == kNone) throw InvariantError("transport problem is unbounded");

    if (delta > 0.0) {
      flow_[entering] += delta;
      for (std::size_t u = first; u != join; u = parent_[u]) {
        double& f = flow_[pred_[u]];
        f = std::max(0.0, f + (up_[u] ? -delta : delta));
      }
      for (std::size_t u = second; u != join; u = parent_[u]) {
        double& f = flow_[pred_[u]];
        f = std::max(0.0, f + (up_[u] ? delta : -delta));
      }
    }
    flow_[pred_[leaving_node]] = 0.0;
    pred_[leaving_node] = entering;
    rebuild_tree();
  }

  // Re-derives parent, depth and potentials from the current set of tree arcs.
  void rebuild_tree() {
    offsets_.assign(nodes_ + 1, 0);
    for (std::size_t u = 0; u < nodes_; ++u) {
      if (u == root_) continue;
      const std::size_t e = pred_[u];
      ++offsets_[arc_source(e) + 1];
      ++offsets_[arc_target(e) + 1];
    }
    for (std::size_t u = 0; u < nodes_; ++u) offsets_[u + 1] += offsets_[u];
    incident_.resize(offsets_[nodes_]);
    fill_.assign(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t u = 0; u < nodes_; ++u) {
      if (u == root_) continue;
      const std::size_t e = pred_[u];
      incident_[fill_[arc_source(e)]++] = e;
      incident_[fill_[arc_target(e)]++] = e;
    }

    queue_.clear();
    queue_.push_back(root_);
    parent_[root_] = kNone;
    pred_[root_] = kNone;
    depth_[root_] = 0;
    pi_[root_] = 0.0;
    for (std::size_t head = 0; head < queue_.size(); ++head) {
      const std::size_t u = queue_[head];
      for (std::size_t p = offsets_[u]; p < offsets_[u + 1]; ++p) {
        const std::size_t e = incident_[p];
        if (e == pred_[u]) continue;
        const bool outgoing = arc_source(e) == u;
        const std::size_t v = outgoing ? arc_target(e) : arc_source(e);
        parent_[v] = u;
        pred_[v] = e;
        up_[v] = outgoing ? 0 : 1;
        depth_[v] = depth_[u] + 1;
        pi_[v] = outgoing ? pi_[u] + cost_[e] : pi_[u] - cost_[e];
        queue_.push_back(v);
      }
    }
    if (queue_.size() != nodes_) throw InvariantError("network simplex lost its spanning tree");
  }

  std::size_t n_;
  std::size_t k_;
  std::size_t root_;
  std::size_t nodes_;
  std::size_t bipartite_;
  double epsilon_ = 0.0;
  std::size_t block_size_ = 10;
  std::size_t next_arc_ = 0;

  std::vector<double> cost_;
  std::vector<double> flow_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> pred_;
  std::vector<char> up_;
  std::vector<std::size_t> depth_;
  std::vector<double> pi_;

  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> fill_;
  std::vector<std::size_t> incident_;
  std::vector<std::size_t> queue_;
};

}  // namespace

TransportSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  std::span<const double> cost) {
  if (supply.empty() || demand.empty()) throw DomainError("transport: empty marginal");
  if (cost.size() != supply.size() * demand.size()) {
    throw DomainError("transport: cost matrix has the wrong shape");
  }
  double total_supply = 0.0;
  double total_demand = 0.0;
  for (double s : supply) {
    if (!(s > 0.0)) throw DomainError("transport: supplies must be positive");
    total_supply += s;
  }
  for (double d : demand) {
    if (!(d > 0.0)) throw DomainError("transport: demands must be positive");
    total_demand += d;
  }
  if (std::abs(total_supply - total_demand) > 1e-9) {
    throw DomainError("transport: supply and demand are not balanced");
  }
  NetworkSimplex solver(supply, demand, cost);
  return solver.run();
}

}  // namespace indimart
