#pragma once

// Executable checks of the identities satisfied by a Decomposition.
//
// Every stage quantity is recomputed from the stored increments on the final
// space: for step k, xi_1 = X_k - X_{k-1}, eta_n = Y^n_k and
// xi_{n+1} = xi_n - eta_n. Truncation residuals claimed in the step metadata
// widen the bounds of the identities they affect; a separate check confirms
// the claims match the recomputed residuals.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "indimart/decompose.hpp"
#include "indimart/space.hpp"

namespace indimart {

struct Witness {
  std::optional<std::size_t> n;
  std::optional<std::size_t> k;
  std::optional<std::string> point;
};

struct Check {
  std::string name;
  double quantity = 0.0;
  double bound = 0.0;
  bool pass = true;
  // Report-only checks always pass; their quantity is informational.
  bool asserted = true;
  Witness witness;
  std::string note;
};

struct Report {
  std::vector<Check> checks;
  bool pass() const;
  const Check* find(const std::string& name) const;
};

struct IndependenceResult {
  double defect = 0.0;
  std::size_t block = 0;   // block of A (past) where the worst cell sits
  std::size_t point = 0;   // a point in the worst cell, when the cell is nonempty
  std::size_t cells = 0;   // joint cells examined
  bool probe = false;      // characteristic-function fallback, not a proof
};

// max over blocks B of A and atoms y of law(Y) of |P(Y = y, B) - P(Y = y) P(B)|.
IndependenceResult check_independence_of_past(const RandomVector& Y, const Partition& A,
                                              const WeightedSpace& space);

// Joint-law factorisation of (Y_1, ..., Y_K). Falls back to a
// characteristic-function probe above kMaxJointCells support combinations.
inline constexpr std::size_t kMaxJointCells = 1'000'000;
inline constexpr std::size_t kProbeTuples = 32;
IndependenceResult check_mutual_independence(std::span<const RandomVector> Ys,
                                             const WeightedSpace& space);

// Per-stage quantities recomputed on the final space.
struct StageRecord {
  std::size_t k = 0;
  std::size_t n = 0;
  double xi_norm_sq = 0.0;
  double xi_l1 = 0.0;
  double eta_norm_sq = 0.0;
  double residual_norm_sq = 0.0;  // ||xi_{n+1}||^2
  double self_consistency = 0.0;  // sup |eta_n - E[xi_n | eta_n]|
  std::size_t worst_point = 0;
};

std::vector<StageRecord> stage_records(const Decomposition& d);

std::vector<Check> check_norm_identities(const Decomposition& d);
std::vector<Check> check_tail_inequality(const Decomposition& d);
Report run_full_report(const Decomposition& d);

// One row per check: name, quantity, bound, status.
std::string format_table(const Report& report);

}  // namespace indimart
