#include "indimart/transport.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "indimart/errors.hpp"
#include "indimart/network_simplex.hpp"

namespace indimart {

namespace {

// Cumulative-mass breakpoints of different laws closer than this are one
// breakpoint.
constexpr double kBreakpointTolerance = 1e-12;

// Pieces of [0,1] on which every listed quantile function is constant.
struct QuantileGrid {
  std::vector<double> length;
  std::vector<std::vector<std::size_t>> atom;  // atom[law][piece]
};

QuantileGrid quantile_grid(std::span<const DiscreteLaw* const> laws) {
  struct Break {
    double at;
    std::size_t law;
  };
  std::vector<Break> breaks;
  for (std::size_t l = 0; l < laws.size(); ++l) {
    double cumulative = 0.0;
    for (std::size_t a = 0; a + 1 < laws[l]->size(); ++a) {
      cumulative += laws[l]->mass(a);
      breaks.push_back(Break{std::clamp(cumulative, 0.0, 1.0), l});
    }
  }
  std::stable_sort(breaks.begin(), breaks.end(),
                   [](const Break& a, const Break& b) { return a.at < b.at; });

  // A breakpoint joins the open cluster when it is close to the cluster start
  // and its law is not represented yet; the same law never merges with itself.
  std::vector<double> boundary{0.0};
  std::vector<std::size_t> cluster_of(breaks.size());
  std::vector<char> present(laws.size(), 0);
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < breaks.size(); ++i) {
    const Break& b = breaks[i];
    const bool open = boundary.size() > 1;
    if (!open || b.at - boundary.back() >= kBreakpointTolerance || present[b.law]) {
      for (std::size_t l : members) present[l] = 0;
      members.clear();
      boundary.push_back(b.at);
    }
    present[b.law] = 1;
    members.push_back(b.law);
    cluster_of[i] = boundary.size() - 2;
  }
  boundary.push_back(1.0);

  const std::size_t pieces = boundary.size() - 1;
  QuantileGrid grid;
  grid.atom.assign(laws.size(), {});
  std::vector<std::size_t> counter(laws.size(), 0);
  std::size_t next_break = 0;
  for (std::size_t j = 0; j < pieces; ++j) {
    if (j > 0) {
      while (next_break < breaks.size() && cluster_of[next_break] == j - 1) {
        ++counter[breaks[next_break].law];
        ++next_break;
      }
    }
    const double length = boundary[j + 1] - boundary[j];
    if (!(length > 0.0)) continue;
    grid.length.push_back(length);
    for (std::size_t l = 0; l < laws.size(); ++l) grid.atom[l].push_back(counter[l]);
  }
  return grid;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return s;
}

void require_same_dim(const DiscreteLaw& nu, const DiscreteLaw& mu) {
  if (nu.dim() != mu.dim()) {
    throw DomainError("laws of dimension " + std::to_string(nu.dim()) + " and " +
                      std::to_string(mu.dim()));
  }
}

Coupling comonotone_coupling(const DiscreteLaw& nu, const DiscreteLaw& mu) {
  const DiscreteLaw* pair[] = {&nu, &mu};
  const QuantileGrid grid = quantile_grid(pair);
  std::map<std::pair<std::size_t, std::size_t>, double> mass;
  for (std::size_t j = 0; j < grid.length.size(); ++j) {
    mass[{grid.atom[0][j], grid.atom[1][j]}] += grid.length[j];
  }
  std::vector<CouplingCell> cells;
  cells.reserve(mass.size());
  for (const auto& [key, m] : mass) cells.push_back(CouplingCell{key.first, key.second, m});
  return Coupling(nu, mu, std::move(cells));
}

std::vector<double> cost_matrix(const DiscreteLaw& nu, const DiscreteLaw& mu) {
  std::vector<double> cost(nu.size() * mu.size());
  for (std::size_t i = 0; i < nu.size(); ++i) {
    for (std::size_t j = 0; j < mu.size(); ++j) {
      cost[i * mu.size() + j] = squared_distance(nu.location(i), mu.location(j));
    }
  }
  return cost;
}

void check_weights(std::span<const DiscreteLaw> laws, std::span<const double> weights) {
  if (laws.empty()) throw DomainError("barycenter of no laws");
  if (laws.size() != weights.size()) {
    throw DomainError("barycenter: " + std::to_string(laws.size()) + " laws but " +
                      std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw DomainError("barycenter weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-10) throw DomainError("barycenter weights must sum to 1");
  for (const DiscreteLaw& l : laws) require_same_dim(laws.front(), l);
}

Barycenter quantile_barycenter(std::span<const DiscreteLaw> laws, std::span<const double> weights) {
  std::vector<const DiscreteLaw*> ptrs;
  for (const DiscreteLaw& l : laws) ptrs.push_back(&l);
  const QuantileGrid grid = quantile_grid(ptrs);
  std::vector<double> locations(grid.length.size(), 0.0);
  for (std::size_t j = 0; j < grid.length.size(); ++j) {
    for (std::size_t l = 0; l < laws.size(); ++l) {
      locations[j] += weights[l] * laws[l].location(grid.atom[l][j])[0];
    }
  }
  Barycenter out{DiscreteLaw(1, std::move(locations), grid.length)};
  out.objective = barycenter_objective(out.law, laws, weights);
  return out;
}

// Fixed-point iteration: couple the current candidate to every input, move
// each candidate atom to the weighted average of where it is sent, repeat.
// Every step is non-increasing in the objective and keeps the mean equal to
// the weighted mean of the inputs.
Barycenter fixed_point_barycenter(std::span<const DiscreteLaw> laws,
                                  std::span<const double> weights) {
  const std::size_t m = laws.front().dim();
  std::vector<double> locations;
  std::vector<double> masses;
  for (std::size_t l = 0; l < laws.size(); ++l) {
    for (std::size_t a = 0; a < laws[l].size(); ++a) {
      const auto x = laws[l].location(a);
      locations.insert(locations.end(), x.begin(), x.end());
      masses.push_back(weights[l] * laws[l].mass(a));
    }
  }
  DiscreteLaw current = Clustering::of(m, locations, masses).law;

  auto couple_all = [&](const DiscreteLaw& candidate, double& objective) {
    std::vector<Coupling> plans;
    objective = 0.0;
    for (std::size_t l = 0; l < laws.size(); ++l) {
      plans.push_back(lp_coupling(candidate, laws[l]));
      objective += weights[l] * plans.back().cost();
    }
    return plans;
  };

  double objective = 0.0;
  std::vector<Coupling> plans = couple_all(current, objective);
  Barycenter out{current, true, 0, objective};
  for (std::size_t it = 1; it <= kBarycenterMaxIterations; ++it) {
    std::vector<double> moved(current.size() * m, 0.0);
    std::vector<double> shipped(current.size(), 0.0);
    for (std::size_t l = 0; l < laws.size(); ++l) {
      for (const CouplingCell& c : plans[l].cells()) {
        const auto x = laws[l].location(c.target);
        for (std::size_t d = 0; d < m; ++d) moved[c.source * m + d] += weights[l] * c.mass * x[d];
        shipped[c.source] += weights[l] * c.mass;
      }
    }
    for (std::size_t s = 0; s < current.size(); ++s) {
      for (std::size_t d = 0; d < m; ++d) moved[s * m + d] /= shipped[s];
    }
    DiscreteLaw candidate =
        Clustering::of(m, moved, std::vector<double>(current.masses().begin(), current.masses().end()))
            .law;
    double candidate_objective = 0.0;
    std::vector<Coupling> candidate_plans = couple_all(candidate, candidate_objective);
    out.iterations = it;
    const double decrease = objective - candidate_objective;
    if (decrease > 0.0) {
      current = std::move(candidate);
      plans = std::move(candidate_plans);
      objective = candidate_objective;
      out.law = current;
      out.objective = objective;
    }
    if (decrease < kBarycenterTolerance) break;
  }
  return out;
}

}  // namespace

Coupling::Coupling(DiscreteLaw source, DiscreteLaw target, std::vector<CouplingCell> cells)
    : source_(std::move(source)), target_(std::move(target)), cells_(std::move(cells)) {
  require_same_dim(source_, target_);
  std::sort(cells_.begin(), cells_.end(), [](const CouplingCell& a, const CouplingCell& b) {
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
  std::vector<double> rows(source_.size(), 0.0);
  std::vector<double> cols(target_.size(), 0.0);
  for (const CouplingCell& c : cells_) {
    if (c.source >= source_.size() || c.target >= target_.size()) {
      throw DomainError("coupling cell names an unknown atom");
    }
    if (!(c.mass > 0.0)) throw InvariantError("coupling masses must be positive");
    rows[c.source] += c.mass;
    cols[c.target] += c.mass;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::abs(rows[i] - source_.mass(i)) > 1e-10) {
      throw InvariantError("coupling row " + std::to_string(i) + " does not match the source law");
    }
  }
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (std::abs(cols[j] - target_.mass(j)) > 1e-10) {
      throw InvariantError("coupling column " + std::to_string(j) +
                           " does not match the target law");
    }
  }
}

double Coupling::cost() const {
  double s = 0.0;
  for (const CouplingCell& c : cells_) {
    s += c.mass * squared_distance(source_.location(c.source), target_.location(c.target));
  }
  return s;
}

double w2_sq(const DiscreteLaw& nu, const DiscreteLaw& mu) {
  require_same_dim(nu, mu);
  if (nu.dim() != 1) return lp_w2_sq(nu, mu);
  const DiscreteLaw* pair[] = {&nu, &mu};
  const QuantileGrid grid = quantile_grid(pair);
  double s = 0.0;
  for (std::size_t j = 0; j < grid.length.size(); ++j) {
    const double d = nu.location(grid.atom[0][j])[0] - mu.location(grid.atom[1][j])[0];
    s += grid.length[j] * d * d;
  }
  return s;
}

Coupling optimal_coupling(const DiscreteLaw& nu, const DiscreteLaw& mu) {
  require_same_dim(nu, mu);
  if (nu.dim() == 1) return comonotone_coupling(nu, mu);
  return lp_coupling(nu, mu);
}

Coupling lp_coupling(const DiscreteLaw& nu, const DiscreteLaw& mu) {
  require_same_dim(nu, mu);
  const std::vector<double> cost = cost_matrix(nu, mu);
  const TransportSolution solution = solve_transport(nu.masses(), mu.masses(), cost);
  std::vector<CouplingCell> cells;
  cells.reserve(solution.flows.size());
  for (const TransportFlow& f : solution.flows) {
    cells.push_back(CouplingCell{f.source, f.target, f.mass});
  }
  return Coupling(nu, mu, std::move(cells));
}

double lp_w2_sq(const DiscreteLaw& nu, const DiscreteLaw& mu) {
  return lp_coupling(nu, mu).cost();
}

Barycenter barycenter(std::span<const DiscreteLaw> laws, std::span<const double> weights) {
  check_weights(laws, weights);
  if (laws.front().dim() == 1) return quantile_barycenter(laws, weights);
  return fixed_point_barycenter(laws, weights);
}

double barycenter_objective(const DiscreteLaw& candidate, std::span<const DiscreteLaw> laws,
                            std::span<const double> weights) {
  check_weights(laws, weights);
  double s = 0.0;
  for (std::size_t l = 0; l < laws.size(); ++l) s += weights[l] * w2_sq(candidate, laws[l]);
  return s;
}

}  // namespace indimart
