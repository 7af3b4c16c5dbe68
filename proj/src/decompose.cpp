#include "indimart/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "indimart/errors.hpp"

namespace indimart {

namespace {

// eta_n with ||eta_n||^2 below this fraction of ||xi_n||^2 counts as zero.
constexpr double kDegenerateRatio = 1e-20;

void require_points(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DomainError(std::string(what) + ": expected " + std::to_string(want) +
                      " points, got " + std::to_string(got));
  }
}

struct Worst {
  double value = 0.0;
  std::size_t point = 0;
};

Worst sup_with_point(const RandomVector& X) {
  Worst w;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double s = 0.0;
    for (double v : X.at(i)) s += v * v;
    if (std::sqrt(s) > w.value) w = Worst{std::sqrt(s), i};
  }
  return w;
}

}  // namespace

void validate(const DecomposeOptions& opts) {
  if (!(opts.tol_rel > 0.0 && opts.tol_rel < 1.0)) {
    throw DomainError("tol_rel must lie in (0, 1)");
  }
  if (opts.n_max < 1) throw DomainError("n_max must be at least 1");
  if (opts.max_points < 1) throw DomainError("max_points must be at least 1");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::converged:
      return "converged";
    case StopReason::n_max:
      return "n_max";
    case StopReason::max_points:
      return "max_points";
  }
  return "converged";
}

std::optional<StopReason> stop_reason_from_string(const std::string& s) {
  if (s == "converged") return StopReason::converged;
  if (s == "n_max") return StopReason::n_max;
  if (s == "max_points") return StopReason::max_points;
  return std::nullopt;
}

IndependentApprox best_independent_approx(const RandomVector& xi, const Partition& A,
                                          const WeightedSpace& space) {
  require_points(xi.size(), space.size(), "best_independent_approx");
  require_points(A.size(), space.size(), "best_independent_approx: partition");

  const Worst centre = sup_with_point(cond_exp(xi, A, space));
  if (centre.value > kMeanTolerance) {
    throw PreconditionError("conditional mean of xi is " + std::to_string(centre.value) +
                            " on the block of point '" + space.id(centre.point) + "'");
  }

  const std::vector<std::vector<std::size_t>> blocks = A.blocks();
  if (blocks.size() == 1) {
    return IndependentApprox{xi, Refinement::identity(space), Barycenter{law(xi, space)}};
  }

  std::vector<DiscreteLaw> laws;
  std::vector<double> weights;
  std::vector<std::size_t> atom_of(space.size());
  double total = 0.0;
  for (const auto& block : blocks) {
    Clustering c = cluster(xi, block, space);
    double w = 0.0;
    for (std::size_t j = 0; j < block.size(); ++j) {
      atom_of[block[j]] = c.atom_of[j];
      w += space.weight(block[j]);
    }
    laws.push_back(std::move(c.law));
    weights.push_back(w);
    total += w;
  }
  for (double& w : weights) w /= total;

  Barycenter bary = barycenter(laws, weights);

  // Per block, the cells leaving each source atom.
  std::vector<std::vector<std::vector<CouplingCell>>> rows(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Coupling plan = optimal_coupling(laws[b], bary.law);
    rows[b].resize(laws[b].size());
    for (const CouplingCell& c : plan.cells()) rows[b][c.source].push_back(c);
  }

  std::vector<std::size_t> parent;
  std::vector<double> child_weight;
  std::vector<double> eta;
  for (std::size_t p = 0; p < space.size(); ++p) {
    const auto& row = rows[A.block_of(p)][atom_of[p]];
    double shipped = 0.0;
    for (const CouplingCell& c : row) shipped += c.mass;
    for (const CouplingCell& c : row) {
      parent.push_back(p);
      child_weight.push_back(row.size() == 1 ? space.weight(p) : space.weight(p) * c.mass / shipped);
      const auto y = bary.law.location(c.target);
      eta.insert(eta.end(), y.begin(), y.end());
    }
  }
  return IndependentApprox{RandomVector(xi.dim(), std::move(eta)),
                           Refinement(std::move(parent), std::move(child_weight)),
                           std::move(bary)};
}

StepDecomposition stage_decompose(const RandomVector& xi, const Partition& A,
                                  const WeightedSpace& space, const DecomposeOptions& opts) {
  validate(opts);
  require_points(xi.size(), space.size(), "stage_decompose");
  require_points(A.size(), space.size(), "stage_decompose: partition");

  RandomVector current = xi;
  const RandomVector centre = cond_exp(xi, A, space);
  const Worst defect = sup_with_point(centre);
  if (defect.value > kMeanTolerance) {
    throw PreconditionError("conditional mean of xi is " + std::to_string(defect.value) +
                            " on the block of point '" + space.id(defect.point) + "'");
  }
  if (defect.value > kRecenterThreshold) current = xi - centre;

  StepDecomposition out{.stages = {}, .space = space, .refinement = Refinement::identity(space)};
  out.xi_norm_sq = norm_sq(current, space);
  if (defect.value > kRecenterThreshold) out.recentered = defect.value;
  if (sup_norm(current) == 0.0) return out;

  const double threshold = opts.tol_rel * opts.tol_rel * out.xi_norm_sq;
  Partition block_partition = A;
  for (std::size_t n = 1;; ++n) {
    const double xi_norm_sq = norm_sq(current, out.space);
    const double xi_l1 = l1_norm(current, out.space);
    IndependentApprox approx = best_independent_approx(current, block_partition, out.space);
    WeightedSpace refined = refine(out.space, approx.refinement);
    RandomVector residual = lift(current, approx.refinement) - approx.eta;
    const double eta_norm_sq = norm_sq(approx.eta, refined);
    if (eta_norm_sq <= kDegenerateRatio * xi_norm_sq) {
      throw TheoryViolation("stage " + std::to_string(n) + " produced eta = 0 for xi with ||xi||^2 = " +
                            std::to_string(xi_norm_sq));
    }
    const double residual_norm_sq = norm_sq(residual, refined);
    const double residual_l1 = l1_norm(residual, refined);

    block_partition = lift(block_partition, approx.refinement);
    out.refinement = out.refinement.then(approx.refinement);
    out.space = std::move(refined);
    out.terminal_residual_norm_sq = residual_norm_sq;
    out.stages.push_back(Stage{n, std::move(approx.eta), residual, std::move(approx.refinement),
                               std::move(approx.barycenter), out.space.size(), xi_norm_sq, xi_l1,
                               eta_norm_sq, residual_norm_sq, residual_l1});
    current = std::move(residual);

    if (residual_norm_sq <= threshold) {
      out.converged = true;
      out.stop = StopReason::converged;
      break;
    }
    if (n >= opts.n_max) {
      out.converged = false;
      out.stop = StopReason::n_max;
      break;
    }
    if (out.space.size() > opts.max_points) {
      out.converged = false;
      out.stop = StopReason::max_points;
      break;
    }
  }
  return out;
}

bool Decomposition::converged() const {
  return std::all_of(steps.begin(), steps.end(), [](const StepSummary& s) { return s.converged; });
}

Decomposition decompose_martingale(std::span<const RandomVector> Xs, const Filtration& F,
                                   const WeightedSpace& space, const DecomposeOptions& opts) {
  validate(opts);
  const std::size_t K = F.horizon();
  require_points(F.points(), space.size(), "decompose_martingale: filtration");
  if (Xs.size() != K) {
    throw DomainError("decompose_martingale: " + std::to_string(Xs.size()) +
                      " values for horizon " + std::to_string(K));
  }
  const std::size_t m = Xs.front().dim();
  for (const RandomVector& X : Xs) {
    if (X.dim() != m) throw DomainError("decompose_martingale: dimension changes over time");
    require_points(X.size(), space.size(), "decompose_martingale");
  }
  const MartingaleDefect defect = martingale_defect(Xs, F, space, kMeanTolerance);
  if (defect.defect > kMeanTolerance) {
    throw PreconditionError("not a martingale: E[X_" + std::to_string(defect.time) + " | P_" +
                            std::to_string(defect.time - 1) + "] differs from X_" +
                            std::to_string(defect.time - 1) + " by " +
                            std::to_string(defect.defect) + " at point '" +
                            space.id(defect.point) + "'");
  }

  WeightedSpace current = space;
  std::vector<Partition> P = F.partitions();
  std::vector<RandomVector> X{RandomVector(space.size(), m)};
  X.insert(X.end(), Xs.begin(), Xs.end());
  std::vector<std::vector<RandomVector>> Y(K);
  std::vector<StepSummary> steps;

  for (std::size_t k = 1; k <= K; ++k) {
    const RandomVector xi = X[k] - X[k - 1];
    StepDecomposition step = stage_decompose(xi, P[k - 1], current, opts);

    StepSummary summary;
    summary.k = k;
    summary.converged = step.converged;
    summary.stop = step.stop;
    summary.xi_norm_sq = step.xi_norm_sq;
    summary.recentered = step.recentered;

    for (Stage& s : step.stages) {
      const Refinement& r = s.refinement;
      if (r.size() != current.size() || !r.is_identity()) {
        for (Partition& p : P) p = lift(p, r);
        for (RandomVector& x : X) x = lift(x, r);
        for (auto& row : Y) {
          for (RandomVector& y : row) y = lift(y, r);
        }
      }
      current = refine(current, r);
      // The new variable becomes known at time k, so it joins P_k .. P_K.
      const Partition revealed = level_sets(s.eta);
      for (std::size_t j = k; j <= K; ++j) P[j] = join(P[j], revealed);
      Y[k - 1].push_back(std::move(s.eta));

      summary.stages.push_back(StageSummary{s.index, s.points, s.xi_norm_sq, s.xi_l1,
                                            s.eta_norm_sq, s.residual_norm_sq, s.residual_l1,
                                            s.barycenter.law, s.barycenter.approximate});
    }

    RandomVector residual = X[k] - X[k - 1];
    for (const RandomVector& y : Y[k - 1]) residual = residual - y;
    summary.residual_norm_sq = norm_sq(residual, current);
    summary.residual_sup = sup_norm(residual);
    steps.push_back(std::move(summary));
  }

  Decomposition d;
  d.space = std::move(current);
  d.filtration = Filtration(std::move(P));
  d.dim = m;
  d.horizon = K;
  for (const auto& row : Y) d.terms = std::max(d.terms, row.size());
  for (auto& row : Y) {
    while (row.size() < d.terms) row.emplace_back(d.space.size(), m);
  }
  d.X = std::move(X);
  d.Y = std::move(Y);
  d.steps = std::move(steps);
  d.options = opts;
  assemble(d);
  return d;
}

void assemble(Decomposition& d) {
  d.Z.clear();
  for (std::size_t n = 1; n <= d.terms; ++n) {
    std::vector<RandomVector> z{RandomVector(d.space.size(), d.dim)};
    for (std::size_t k = 1; k <= d.horizon; ++k) z.push_back(z.back() + d.Y[k - 1][n - 1]);
    d.Z.push_back(std::move(z));
  }
}

std::vector<NormRow> norm_table(const Decomposition& d) {
  std::vector<NormRow> rows;
  for (std::size_t n = 1; n <= d.terms; ++n) {
    for (std::size_t k = 1; k <= d.horizon; ++k) {
      const StepSummary& step = d.steps[k - 1];
      NormRow row;
      row.n = n;
      row.k = k;
      row.norm_sq_Y = norm_sq(d.increment(n, k), d.space);
      row.norm_sq_Z = norm_sq(d.martingale(n, k), d.space);
      row.norm_sq_dX = norm_sq(d.X[k] - d.X[k - 1], d.space);
      row.norm_sq_X = norm_sq(d.X[k], d.space);
      row.residual = n <= step.stages.size() ? step.stages[n - 1].residual_norm_sq
                                             : step.residual_norm_sq;
      rows.push_back(row);
    }
  }
  return rows;
}

TailBound closed_tail(const Decomposition& d, std::size_t k, std::size_t N) {
  if (k > d.horizon) {
    throw DomainError("closed_tail: k = " + std::to_string(k) + " beyond horizon " +
                      std::to_string(d.horizon));
  }
  if (N < 1) throw DomainError("closed_tail: N must be at least 1");
  const std::size_t K = d.horizon;
  RandomVector tail(d.space.size(), d.dim);
  for (std::size_t n = 1; n <= std::min(N, d.terms); ++n) {
    tail = tail + (d.martingale(n, K) - d.martingale(n, k));
  }
  TailBound out;
  out.lhs = norm_sq(tail, d.space);
  for (std::size_t s = k + 1; s <= K; ++s) out.rhs += norm_sq(d.X[s] - d.X[s - 1], d.space);
  out.rhs *= 4.0;
  return out;
}

GeneratedMartingale generate_random_martingale(const GeneratorOptions& opts) {
  if (opts.K < 1) throw DomainError("generator: K must be at least 1");
  if (opts.m < 1) throw DomainError("generator: m must be at least 1");
  if (opts.branching < 2 || opts.branching > 36) {
    throw DomainError("generator: branching must lie in [2, 36]");
  }
  const std::size_t b = opts.branching;
  std::size_t leaves = 1;
  for (std::size_t k = 0; k < opts.K; ++k) {
    if (leaves > 10'000'000 / b) throw DomainError("generator: tree too large");
    leaves *= b;
  }

  std::mt19937_64 rng(opts.seed);

  // Leaf weights: products of branch probabilities along the path.
  std::vector<double> weight(1, 1.0);
  for (std::size_t k = 0; k < opts.K; ++k) {
    std::vector<double> next;
    next.reserve(weight.size() * b);
    for (double w : weight) {
      std::vector<double> branch(b, 1.0);
      if (opts.weights == WeightProfile::random) {
        std::uniform_real_distribution<double> u(0.5, 1.5);
        for (double& x : branch) x = u(rng);
      }
      double total = 0.0;
      for (double x : branch) total += x;
      for (double x : branch) next.push_back(w * x / total);
    }
    weight = std::move(next);
  }
  double total = 0.0;
  for (double w : weight) total += w;
  for (double& w : weight) w /= total;

  static constexpr char kDigits[] = "0123456789abcdefghijklmnopqrstuvwxyz";
  std::vector<std::string> ids(leaves);
  for (std::size_t i = 0; i < leaves; ++i) {
    std::string path(opts.K, '0');
    std::size_t rest = i;
    for (std::size_t k = opts.K; k-- > 0;) {
      path[k] = kDigits[rest % b];
      rest /= b;
    }
    ids[i] = "p" + path;
  }
  WeightedSpace space(std::move(ids), std::move(weight));

  std::vector<Partition> partitions;
  std::size_t width = leaves;
  for (std::size_t k = 0; k <= opts.K; ++k) {
    std::vector<std::size_t> labels(leaves);
    for (std::size_t i = 0; i < leaves; ++i) labels[i] = i / width;
    partitions.push_back(Partition::from_labels(labels));
    width /= b;
  }
  Filtration F(std::move(partitions));

  std::vector<double> values(leaves * opts.m);
  if (opts.values == ValueDistribution::normal) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& v : values) v = g(rng);
  } else {
    std::uniform_int_distribution<int> u(-3, 3);
    for (double& v : values) v = u(rng);
  }
  RandomVector terminal(opts.m, std::move(values));
  const std::vector<double> centre = mean(terminal, space);
  std::vector<double> shift;
  for (std::size_t i = 0; i < leaves; ++i) shift.insert(shift.end(), centre.begin(), centre.end());
  terminal = terminal - RandomVector(opts.m, std::move(shift));

  std::vector<RandomVector> X;
  for (std::size_t k = 1; k < opts.K; ++k) X.push_back(cond_exp(terminal, F.at(k), space));
  X.push_back(terminal);
  return GeneratedMartingale{std::move(space), std::move(F), std::move(X)};
}

}  // namespace indimart
