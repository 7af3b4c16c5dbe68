#include "indimart/verify.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "indimart/errors.hpp"

namespace indimart {

namespace {

constexpr double kAdaptedTolerance = 1e-9;
constexpr double kMartingaleTolerance = 1e-9;
constexpr double kIncrementTolerance = 1e-12;
constexpr double kReconstructionTolerance = 1e-7;
constexpr double kNormTolerance = 1e-7;
constexpr double kStageTolerance = 1e-8;
constexpr double kPastTolerance = 1e-10;
constexpr double kMutualTolerance = 1e-9;
constexpr double kTailTolerance = 1e-8;
constexpr double kBoundednessTolerance = 1e-10;
constexpr double kMetadataTolerance = 1e-9;
constexpr std::uint64_t kProbeSeed = 0x5eed5eedULL;

// Keeps the entry with the largest quantity / bound; passes only if every
// entry is within its own bound.
class Tracker {
 public:
  Tracker(std::string name, double default_bound) {
    check_.name = std::move(name);
    check_.bound = default_bound;
  }

  void observe(double quantity, double bound, Witness w = {}, bool strict = false) {
    const bool ok = strict ? quantity < bound : quantity <= bound;
    if (!ok) check_.pass = false;
    const double score = bound > 0.0 ? quantity / bound
                                     : (quantity > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (!seen_ || score > score_) {
      seen_ = true;
      score_ = score;
      check_.quantity = quantity;
      check_.bound = bound;
      check_.witness = std::move(w);
    }
  }

  Check finish(bool asserted = true, std::string note = {}) {
    check_.asserted = asserted;
    if (!asserted) check_.pass = true;
    check_.note = std::move(note);
    return check_;
  }

 private:
  Check check_;
  bool seen_ = false;
  double score_ = 0.0;
};

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

struct SupResult {
  double value = 0.0;
  std::size_t point = 0;
};

SupResult sup_distance(const RandomVector& a, const RandomVector& b) {
  SupResult r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = distance(a.at(i), b.at(i));
    if (d > r.value) r = SupResult{d, i};
  }
  return r;
}

Witness at(std::optional<std::size_t> n, std::optional<std::size_t> k,
           std::optional<std::string> point = std::nullopt) {
  return Witness{n, k, std::move(point)};
}

std::size_t stage_count(const Decomposition& d, std::size_t k) {
  return std::min(d.steps.at(k - 1).stages.size(), d.terms);
}

// xi_{s+1} of step k: the increment minus every stored Y^n_k.
RandomVector terminal_residual(const Decomposition& d, std::size_t k) {
  RandomVector r = d.X[k] - d.X[k - 1];
  for (std::size_t n = 1; n <= d.terms; ++n) r = r - d.increment(n, k);
  return r;
}

double claimed_residual_before(const Decomposition& d, std::size_t k) {
  double s = 0.0;
  for (std::size_t j = 1; j <= k; ++j) s += d.steps[j - 1].residual_norm_sq;
  return s;
}

}  // namespace

bool Report::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* Report::find(const std::string& name) const {
  for (const Check& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

IndependenceResult check_independence_of_past(const RandomVector& Y, const Partition& A,
                                              const WeightedSpace& space) {
  if (Y.size() != space.size() || A.size() != space.size()) {
    throw DomainError("independence check: sizes differ from the space");
  }
  const Clustering c = Clustering::of(Y.dim(), Y.values(), space.weights());
  const std::size_t atoms = c.law.size();
  std::vector<double> p_atom(atoms, 0.0);
  std::vector<double> p_block(A.block_count(), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    p_atom[c.atom_of[i]] += space.weight(i);
    p_block[A.block_of(i)] += space.weight(i);
  }

  IndependenceResult out;
  std::vector<double> joint(atoms);
  std::vector<std::size_t> first(atoms);
  const auto blocks = A.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    std::fill(joint.begin(), joint.end(), 0.0);
    std::fill(first.begin(), first.end(), blocks[b].front());
    for (auto it = blocks[b].rbegin(); it != blocks[b].rend(); ++it) {
      joint[c.atom_of[*it]] += space.weight(*it);
      first[c.atom_of[*it]] = *it;
    }
    for (std::size_t a = 0; a < atoms; ++a) {
      const double defect = std::abs(joint[a] - p_atom[a] * p_block[b]);
      if (defect > out.defect) {
        out.defect = defect;
        out.block = b;
        out.point = first[a];
      }
    }
    out.cells += atoms;
  }
  return out;
}

IndependenceResult check_mutual_independence(std::span<const RandomVector> Ys,
                                             const WeightedSpace& space) {
  IndependenceResult out;
  if (Ys.size() <= 1) return out;
  for (const RandomVector& Y : Ys) {
    if (Y.size() != space.size()) throw DomainError("independence check: sizes differ");
  }

  std::vector<Clustering> marginals;
  std::vector<std::vector<double>> p;
  double cells = 1.0;
  for (const RandomVector& Y : Ys) {
    marginals.push_back(Clustering::of(Y.dim(), Y.values(), space.weights()));
    std::vector<double> mass(marginals.back().law.size(), 0.0);
    for (std::size_t i = 0; i < space.size(); ++i) mass[marginals.back().atom_of[i]] += space.weight(i);
    p.push_back(std::move(mass));
    cells *= static_cast<double>(p.back().size());
  }

  if (cells <= static_cast<double>(kMaxJointCells)) {
    const std::size_t total = static_cast<std::size_t>(cells);
    std::vector<double> joint(total, 0.0);
    constexpr std::size_t kEmpty = static_cast<std::size_t>(-1);
    std::vector<std::size_t> first(total, kEmpty);
    for (std::size_t i = 0; i < space.size(); ++i) {
      std::size_t index = 0;
      for (std::size_t s = 0; s < Ys.size(); ++s) index = index * p[s].size() + marginals[s].atom_of[i];
      joint[index] += space.weight(i);
      if (first[index] == kEmpty) first[index] = i;
    }
    std::vector<std::size_t> digit(Ys.size(), 0);
    for (std::size_t index = 0; index < total; ++index) {
      double product = 1.0;
      for (std::size_t s = 0; s < Ys.size(); ++s) product *= p[s][digit[s]];
      const double defect = std::abs(joint[index] - product);
      if (defect > out.defect) {
        out.defect = defect;
        out.point = first[index] == kEmpty ? 0 : first[index];
      }
      for (std::size_t s = Ys.size(); s-- > 0;) {
        if (++digit[s] < p[s].size()) break;
        digit[s] = 0;
      }
    }
    out.cells = total;
    return out;
  }

  // Too many cells: compare the joint characteristic function with the
  // product of the marginal ones at random frequencies.
  out.probe = true;
  out.cells = kProbeTuples;
  std::mt19937_64 rng(kProbeSeed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t t = 0; t < kProbeTuples; ++t) {
    std::vector<std::vector<double>> u(Ys.size());
    for (std::size_t s = 0; s < Ys.size(); ++s) {
      u[s].resize(Ys[s].dim());
      for (double& x : u[s]) x = g(rng);
    }
    std::complex<double> joint = 0.0;
    std::vector<std::complex<double>> marginal(Ys.size(), 0.0);
    for (std::size_t i = 0; i < space.size(); ++i) {
      double phase = 0.0;
      for (std::size_t s = 0; s < Ys.size(); ++s) {
        double ps = 0.0;
        const auto y = Ys[s].at(i);
        for (std::size_t d = 0; d < y.size(); ++d) ps += u[s][d] * y[d];
        marginal[s] += space.weight(i) * std::polar(1.0, ps);
        phase += ps;
      }
      joint += space.weight(i) * std::polar(1.0, phase);
    }
    std::complex<double> product = 1.0;
    for (const auto& m : marginal) product *= m;
    out.defect = std::max(out.defect, std::abs(joint - product));
  }
  return out;
}

std::vector<StageRecord> stage_records(const Decomposition& d) {
  std::vector<StageRecord> out;
  for (std::size_t k = 1; k <= d.horizon; ++k) {
    RandomVector xi = d.X[k] - d.X[k - 1];
    for (std::size_t n = 1; n <= stage_count(d, k); ++n) {
      const RandomVector& eta = d.increment(n, k);
      StageRecord r;
      r.k = k;
      r.n = n;
      r.xi_norm_sq = norm_sq(xi, d.space);
      r.xi_l1 = l1_norm(xi, d.space);
      r.eta_norm_sq = norm_sq(eta, d.space);
      const SupResult sc = sup_distance(eta, cond_exp(xi, level_sets(eta), d.space));
      r.self_consistency = sc.value;
      r.worst_point = sc.point;
      xi = xi - eta;
      r.residual_norm_sq = norm_sq(xi, d.space);
      out.push_back(r);
    }
  }
  return out;
}

std::vector<Check> check_norm_identities(const Decomposition& d) {
  Tracker total("norm_identity", kNormTolerance);
  for (std::size_t k = 1; k <= d.horizon; ++k) {
    const double x = norm_sq(d.X[k], d.space);
    double z = 0.0;
    for (std::size_t n = 1; n <= d.terms; ++n) z += norm_sq(d.martingale(n, k), d.space);
    total.observe(std::abs(x - z), kNormTolerance * x + claimed_residual_before(d, k), at({}, k));
  }

  Tracker closed("closed_norm_identity", kNormTolerance);
  if (d.horizon > 0) {
    const std::size_t K = d.horizon;
    const double x = norm_sq(d.X[K], d.space);
    double z = 0.0;
    for (std::size_t n = 1; n <= d.terms; ++n) z += norm_sq(d.martingale(n, K), d.space);
    closed.observe(std::abs(x - z), kNormTolerance * x + claimed_residual_before(d, K), at({}, K));
  }

  Tracker pythagoras("stage_pythagoras", 0.0);
  Tracker tails("stage_tail_sums", 0.0);
  Tracker partial("partial_sum_bound", kStageTolerance);
  const std::vector<StageRecord> records = stage_records(d);
  std::size_t first = 0;
  for (std::size_t k = 1; k <= d.horizon; ++k) {
    std::size_t last = first;
    while (last < records.size() && records[last].k == k) ++last;
    if (last == first) continue;
    const double xi1 = records[first].xi_norm_sq;
    const double bound = kStageTolerance * xi1;
    const double terminal = records[last - 1].residual_norm_sq;

    double eta_sum = 0.0;
    RandomVector partial_sum(d.space.size(), d.dim);
    for (std::size_t i = first; i < last; ++i) {
      const StageRecord& r = records[i];
      eta_sum += r.eta_norm_sq;
      pythagoras.observe(std::abs(xi1 - (r.residual_norm_sq + eta_sum)), bound, at(r.n, k));

      double rest = terminal;
      for (std::size_t j = i; j < last; ++j) rest += records[j].eta_norm_sq;
      tails.observe(std::abs(r.xi_norm_sq - rest), bound, at(r.n, k));

      partial_sum = partial_sum + d.increment(r.n, k);
      partial.observe(std::sqrt(norm_sq(partial_sum, d.space)),
                      2.0 * std::sqrt(xi1) + kStageTolerance, at(r.n, k));
    }
    first = last;
  }
  return {total.finish(), closed.finish(), pythagoras.finish(), tails.finish(), partial.finish()};
}

std::vector<Check> check_tail_inequality(const Decomposition& d) {
  Tracker tail("tail_inequality", kTailTolerance);
  const std::size_t K = d.horizon;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t N = 1; N <= std::max<std::size_t>(d.terms, 1); ++N) {
      const TailBound t = closed_tail(d, k, N);
      tail.observe(t.lhs, t.rhs + kTailTolerance, at(N, k));
    }
  }

  Tracker bounded("boundedness", kBoundednessTolerance);
  for (std::size_t k = 1; k <= K; ++k) {
    const double x = norm_sq(d.X[k], d.space);
    for (std::size_t n = 1; n <= d.terms; ++n) {
      bounded.observe(norm_sq(d.martingale(n, k), d.space), x + kBoundednessTolerance, at(n, k));
    }
  }
  return {tail.finish(), bounded.finish()};
}

Report run_full_report(const Decomposition& d) {
  Report report;
  const std::size_t K = d.horizon;
  const WeightedSpace& space = d.space;
  const Filtration& F = d.filtration;
  auto id = [&](std::size_t point) { return std::optional<std::string>(space.id(point)); };

  Tracker adapted("adapted", kAdaptedTolerance);
  for (std::size_t k = 1; k <= K; ++k) {
    const SupResult x = sup_distance(d.X[k], cond_exp(d.X[k], F.at(k), space));
    adapted.observe(x.value, kAdaptedTolerance, at({}, k, id(x.point)));
    for (std::size_t n = 1; n <= d.terms; ++n) {
      const SupResult y =
          sup_distance(d.increment(n, k), cond_exp(d.increment(n, k), F.at(k), space));
      adapted.observe(y.value, kAdaptedTolerance, at(n, k, id(y.point)));
    }
  }
  report.checks.push_back(adapted.finish());

  const double no_limit = std::numeric_limits<double>::infinity();
  Tracker mx("martingale_X", kMartingaleTolerance);
  if (K > 0) {
    const std::span<const RandomVector> Xs(d.X.data() + 1, K);
    const MartingaleDefect md = martingale_defect(Xs, F, space, no_limit);
    mx.observe(md.defect, kMartingaleTolerance, at({}, md.time, id(md.point)));
  }
  report.checks.push_back(mx.finish());

  Tracker mz("martingale_Z", kMartingaleTolerance);
  for (std::size_t n = 1; n <= d.terms; ++n) {
    const std::span<const RandomVector> Zs(d.Z[n - 1].data() + 1, K);
    const MartingaleDefect md = martingale_defect(Zs, F, space, no_limit);
    mz.observe(md.defect, kMartingaleTolerance, at(n, md.time, id(md.point)));
  }
  report.checks.push_back(mz.finish());

  Tracker inc("increments", kIncrementTolerance);
  for (std::size_t n = 1; n <= d.terms; ++n) {
    for (std::size_t k = 1; k <= K; ++k) {
      const SupResult s = sup_distance(d.martingale(n, k) - d.martingale(n, k - 1), d.increment(n, k));
      inc.observe(s.value, kIncrementTolerance, at(n, k, id(s.point)));
    }
    const SupResult z0 = sup_distance(d.martingale(n, 0), RandomVector(space.size(), d.dim));
    inc.observe(z0.value, kIncrementTolerance, at(n, std::size_t{0}, id(z0.point)));
  }
  report.checks.push_back(inc.finish());

  Tracker recon("reconstruction", kReconstructionTolerance);
  {
    double residual_sup = 0.0;
    for (std::size_t k = 1; k <= K; ++k) {
      residual_sup += d.steps[k - 1].residual_sup;
      RandomVector sum(space.size(), d.dim);
      for (std::size_t n = 1; n <= d.terms; ++n) sum = sum + d.martingale(n, k);
      const SupResult s = sup_distance(sum, d.X[k]);
      recon.observe(s.value, kReconstructionTolerance + residual_sup, at({}, k, id(s.point)));
    }
  }
  report.checks.push_back(recon.finish());

  for (Check& c : check_norm_identities(d)) report.checks.push_back(std::move(c));

  const std::vector<StageRecord> records = stage_records(d);
  const bool scalar = d.dim == 1;
  const std::string vector_note = "reported only for m > 1";
  Tracker self("self_consistency", kStageTolerance);
  Tracker l1("l1_lower_bound", kStageTolerance);
  Tracker decrease("strict_decrease", 1.0);
  for (const StageRecord& r : records) {
    self.observe(r.self_consistency, kStageTolerance, at(r.n, r.k, id(r.worst_point)));
    const double floor = r.xi_l1 / (2.0 * static_cast<double>(d.dim));
    l1.observe(floor - std::sqrt(r.eta_norm_sq), kStageTolerance, at(r.n, r.k));
    if (r.xi_norm_sq > 0.0) {
      decrease.observe(std::sqrt(r.residual_norm_sq / r.xi_norm_sq), 1.0, at(r.n, r.k), true);
    }
  }
  report.checks.push_back(self.finish(scalar, scalar ? "" : vector_note));
  report.checks.push_back(l1.finish(scalar, scalar ? "" : vector_note));
  report.checks.push_back(decrease.finish(scalar, scalar ? "" : vector_note));

  Tracker convergence("convergence", d.options.tol_rel);
  for (std::size_t k = 1; k <= K; ++k) {
    const StepSummary& step = d.steps[k - 1];
    const double ratio = step.xi_norm_sq > 0.0 ? std::sqrt(step.residual_norm_sq / step.xi_norm_sq) : 0.0;
    convergence.observe(ratio, d.options.tol_rel, at(step.stages.size(), k));
  }
  report.checks.push_back(convergence.finish(false, "relative terminal residual; truncation is carried in the other bounds"));

  Tracker past("independence_of_past", kPastTolerance);
  for (std::size_t k = 1; k <= K; ++k) {
    for (std::size_t n = 1; n <= d.terms; ++n) {
      const IndependenceResult r = check_independence_of_past(d.increment(n, k), F.at(k - 1), space);
      past.observe(r.defect, kPastTolerance, at(n, k, id(r.point)));
    }
  }
  report.checks.push_back(past.finish());

  Tracker mutual("mutual_independence", kMutualTolerance);
  bool probed = false;
  for (std::size_t n = 1; n <= d.terms; ++n) {
    std::vector<RandomVector> Ys(d.Y.size(), RandomVector(space.size(), d.dim));
    for (std::size_t k = 1; k <= K; ++k) Ys[k - 1] = d.increment(n, k);
    const IndependenceResult r = check_mutual_independence(Ys, space);
    probed = probed || r.probe;
    mutual.observe(r.defect, kMutualTolerance, at(n, {}, id(r.point)));
  }
  report.checks.push_back(
      mutual.finish(true, probed ? "characteristic-function probe used; inconclusive" : ""));

  for (Check& c : check_tail_inequality(d)) report.checks.push_back(std::move(c));

  // Claimed truncation data against what the increments imply.
  Tracker meta("truncation_metadata", kMetadataTolerance);
  for (std::size_t k = 1; k <= K; ++k) {
    const StepSummary& step = d.steps[k - 1];
    const RandomVector r = terminal_residual(d, k);
    const double scale = 1.0 + norm_sq(d.X[k] - d.X[k - 1], space);
    meta.observe(std::abs(norm_sq(r, space) - step.residual_norm_sq), kMetadataTolerance * scale,
                 at({}, k));
    meta.observe(std::abs(sup_norm(r) - step.residual_sup), kMetadataTolerance * std::sqrt(scale),
                 at({}, k));
    for (std::size_t n = step.stages.size() + 1; n <= d.terms; ++n) {
      const double y = sup_norm(d.increment(n, k));
      meta.observe(y, 0.0, at(n, k));
    }
    if (step.stages.size() > d.options.n_max) meta.observe(1.0, 0.0, at(step.stages.size(), k));
    if (step.converged) {
      const double target = d.options.tol_rel * d.options.tol_rel * step.xi_norm_sq;
      meta.observe(step.residual_norm_sq, target + kMetadataTolerance * scale, at({}, k));
    }
  }
  report.checks.push_back(meta.finish());
  return report;
}

std::string format_table(const Report& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %14s %14s  %-6s %s\n", "check", "quantity", "bound",
                "status", "witness");
  out << line;
  for (const Check& c : report.checks) {
    std::string witness;
    if (c.witness.n) witness += "n=" + std::to_string(*c.witness.n) + " ";
    if (c.witness.k) witness += "k=" + std::to_string(*c.witness.k) + " ";
    if (c.witness.point) witness += "point=" + *c.witness.point;
    const char* status = !c.asserted ? "info" : (c.pass ? "PASS" : "FAIL");
    std::snprintf(line, sizeof line, "%-24s %14.6e %14.6e  %-6s %s\n", c.name.c_str(), c.quantity,
                  c.bound, status, witness.c_str());
    out << line;
    if (!c.note.empty()) out << "    " << c.note << "\n";
  }
  out << (report.pass() ? "overall: PASS\n" : "overall: FAIL\n");
  return out.str();
}

}  // namespace indimart
