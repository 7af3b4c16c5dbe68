#pragma once

// Splitting a martingale into a sum of martingales whose increments are independent.
//
// One step: given xi with E[xi | A] = 0, the best L2 approximation of xi by a
// variable independent of A is found through transport. Its common law is the
// W2 barycenter of the conditional laws of xi on the blocks of A, and on each
// block xi is coupled optimally to that law. The coupling is realised as a map
// by splitting points (a Refinement). Iterating on the residual gives
// eta_1, eta_2, ... with xi = sum eta_n + residual.
//
// Full decomposition: the step is applied to every increment X_k - X_{k-1}
// with A = P_{k-1}, and Z^n_k = sum_{s <= k} Y^n_s.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "indimart/space.hpp"
#include "indimart/transport.hpp"

namespace indimart {

// Tolerances on E[xi | A] = 0. Defects up to kRecenterThreshold are float
// noise and ignored; up to kMeanTolerance they are removed on entry; beyond
// that the input is rejected.
inline constexpr double kRecenterThreshold = 1e-12;
inline constexpr double kMeanTolerance = 1e-9;

struct DecomposeOptions {
  double tol_rel = 1e-6;
  std::size_t n_max = 64;
  // A step stops (unconverged) once the refined space exceeds this many points.
  std::size_t max_points = 1'000'000;
};

void validate(const DecomposeOptions& opts);

struct IndependentApprox {
  RandomVector eta;  // on the refined space
  Refinement refinement;
  Barycenter barycenter;
};

IndependentApprox best_independent_approx(const RandomVector& xi, const Partition& A,
                                          const WeightedSpace& space);

struct Stage {
  std::size_t index = 0;  // n, from 1
  RandomVector eta;       // eta_n on the space after this stage's refinement
  RandomVector residual;  // xi_{n+1} on the same space
  Refinement refinement;
  Barycenter barycenter;
  std::size_t points = 0;  // size of the refined space
  double xi_norm_sq = 0.0;
  double xi_l1 = 0.0;
  double eta_norm_sq = 0.0;
  double residual_norm_sq = 0.0;
  double residual_l1 = 0.0;
};

enum class StopReason { converged, n_max, max_points };

std::string to_string(StopReason r);
std::optional<StopReason> stop_reason_from_string(const std::string& s);

struct StepDecomposition {
  std::size_t k = 0;
  std::vector<Stage> stages;
  double xi_norm_sq = 0.0;  // ||xi_1||^2 after recentering
  double recentered = 0.0;  // sup of the conditional mean removed on entry
  double terminal_residual_norm_sq = 0.0;
  bool converged = true;
  StopReason stop = StopReason::converged;
  WeightedSpace space;     // after the last stage
  Refinement refinement;   // composite, from the input space
};

StepDecomposition stage_decompose(const RandomVector& xi, const Partition& A,
                                  const WeightedSpace& space, const DecomposeOptions& opts = {});

// What is kept of each stage once the step has been folded into a
// Decomposition.
struct StageSummary {
  std::size_t n = 0;
  std::size_t points = 0;
  double xi_norm_sq = 0.0;
  double xi_l1 = 0.0;
  double eta_norm_sq = 0.0;
  double residual_norm_sq = 0.0;
  double residual_l1 = 0.0;
  DiscreteLaw barycenter = DiscreteLaw::point_mass({0.0});
  bool approximate = false;
};

struct StepSummary {
  std::size_t k = 0;
  bool converged = true;
  StopReason stop = StopReason::converged;
  double xi_norm_sq = 0.0;
  double recentered = 0.0;
  double residual_norm_sq = 0.0;
  double residual_sup = 0.0;
  std::vector<StageSummary> stages;
};

struct Decomposition {
  WeightedSpace space = WeightedSpace::uniform(1);
  Filtration filtration = Filtration({Partition::trivial(1), Partition::trivial(1)});
  std::size_t dim = 1;
  std::size_t horizon = 0;  // K
  std::size_t terms = 0;    // N, the largest stage count over k
  std::vector<RandomVector> X;                // X_0 .. X_K
  std::vector<std::vector<RandomVector>> Y;   // Y[k-1][n-1]
  std::vector<std::vector<RandomVector>> Z;   // Z[n-1][k], with Z[n-1][0] = 0
  std::vector<StepSummary> steps;             // steps[k-1]
  DecomposeOptions options;

  const RandomVector& increment(std::size_t n, std::size_t k) const { return Y.at(k - 1).at(n - 1); }
  const RandomVector& martingale(std::size_t n, std::size_t k) const { return Z.at(n - 1).at(k); }
  // True when every step converged; otherwise the residuals carry the rest.
  bool converged() const;
};

// Xs holds X_1 .. X_K.
Decomposition decompose_martingale(std::span<const RandomVector> Xs, const Filtration& F,
                                   const WeightedSpace& space, const DecomposeOptions& opts = {});

// Fills Z from Y.
void assemble(Decomposition& d);

struct NormRow {
  std::size_t n = 0;
  std::size_t k = 0;
  double norm_sq_Y = 0.0;
  double norm_sq_Z = 0.0;
  double norm_sq_dX = 0.0;
  double norm_sq_X = 0.0;
  double residual = 0.0;  // ||xi_{n+1}||^2 of step k, terminal beyond the stage count
};

std::vector<NormRow> norm_table(const Decomposition& d);

struct TailBound {
  double lhs = 0.0;  // || sum_{n <= N} (Z^n_K - Z^n_k) ||^2
  double rhs = 0.0;  // 4 || X_K - X_k ||^2
};

// 0 <= k <= K, N >= 1.
TailBound closed_tail(const Decomposition& d, std::size_t k, std::size_t N);

enum class WeightProfile { uniform, random };
enum class ValueDistribution { normal, integer };

struct GeneratorOptions {
  std::uint64_t seed = 0;
  std::size_t K = 1;
  std::size_t m = 1;
  std::size_t branching = 2;
  WeightProfile weights = WeightProfile::uniform;
  ValueDistribution values = ValueDistribution::normal;
};

struct GeneratedMartingale {
  WeightedSpace space;
  Filtration filtration;
  std::vector<RandomVector> X;  // X_1 .. X_K
};

// A tree with `branching` children per node and K levels; leaves are the
// points. X_K is drawn at the leaves, X_k = E[X_K | P_k] - E[X_K].
GeneratedMartingale generate_random_martingale(const GeneratorOptions& opts);

}  // namespace indimart
