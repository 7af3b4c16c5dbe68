#pragma once

// Finite filtered probability spaces.
//
// A WeightedSpace is an ordered list of points with strictly positive
// weights. Random vectors, partitions and filtrations over a space are plain
// index-aligned containers: entry i always refers to point i of the space they
// are used with. Every operation that combines them checks the sizes agree.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace indimart {

// Weights must sum to one within this.
inline constexpr double kWeightTolerance = 1e-12;
// Atoms of a law closer than this (Euclidean) are one atom.
inline constexpr double kMergeTolerance = 1e-9;

class WeightedSpace {
 public:
  WeightedSpace(std::vector<std::string> ids, std::vector<double> weights);

  // n points named "0" .. "n-1", each of weight 1/n.
  static WeightedSpace uniform(std::size_t n);

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> weights() const { return weights_; }
  std::optional<std::size_t> find(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<double> weights_;
  std::unordered_map<std::string, std::size_t> index_;
};

// An R^m valued function on a space, stored point-major.
class RandomVector {
 public:
  // The zero vector.
  RandomVector(std::size_t points, std::size_t dim);
  RandomVector(std::size_t dim, std::vector<double> flat_values);

  static RandomVector scalar(std::vector<double> values) {
    return RandomVector(1, std::move(values));
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return values_.size() / dim_; }
  std::span<const double> at(std::size_t point) const {
    return std::span<const double>(values_).subspan(point * dim_, dim_);
  }
  std::span<const double> values() const { return values_; }

  RandomVector operator+(const RandomVector& other) const;
  RandomVector operator-(const RandomVector& other) const;
  RandomVector operator*(double factor) const;

  friend bool operator==(const RandomVector&, const RandomVector&) = default;

 private:
  std::size_t dim_;
  std::vector<double> values_;
};

class Partition {
 public:
  static Partition trivial(std::size_t points);
  static Partition finest(std::size_t points);
  // Any labelling; blocks are renumbered in order of first appearance.
  static Partition from_labels(std::span<const std::size_t> labels);
  // Validates that blocks are nonempty, disjoint and cover 0..points-1.
  static Partition from_blocks(std::size_t points,
                               const std::vector<std::vector<std::size_t>>& blocks);

  std::size_t size() const { return labels_.size(); }
  std::size_t block_count() const { return block_count_; }
  std::size_t block_of(std::size_t point) const { return labels_[point]; }
  std::span<const std::size_t> labels() const { return labels_; }
  // Point indices per block, each in increasing order.
  std::vector<std::vector<std::size_t>> blocks() const;

  // True when every block of *this lies inside a block of `coarser`.
  bool refines(const Partition& coarser) const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  Partition() = default;
  std::vector<std::size_t> labels_;
  std::size_t block_count_ = 0;
};

// Coarsest common refinement.
Partition join(const Partition& a, const Partition& b);

// Level sets of X, identifying values closer than kMergeTolerance.
Partition level_sets(const RandomVector& X);

class Filtration {
 public:
  // Validates P_0 trivial and P_k refines P_{k-1}.
  explicit Filtration(std::vector<Partition> partitions);

  std::size_t horizon() const { return partitions_.size() - 1; }
  std::size_t points() const { return partitions_.front().size(); }
  const Partition& at(std::size_t k) const { return partitions_.at(k); }
  const std::vector<Partition>& partitions() const { return partitions_; }

 private:
  std::vector<Partition> partitions_;
};

// Finitely supported probability measure on R^m. Atoms are kept sorted
// lexicographically by location, with locations closer than kMergeTolerance
// merged (masses summed, location the mass-weighted average).
class DiscreteLaw {
 public:
  DiscreteLaw(std::size_t dim, std::vector<double> flat_locations,
              std::vector<double> masses);

  static DiscreteLaw point_mass(std::vector<double> location);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return masses_.size(); }
  std::span<const double> location(std::size_t atom) const {
    return std::span<const double>(locations_).subspan(atom * dim_, dim_);
  }
  std::span<const double> locations() const { return locations_; }
  double mass(std::size_t atom) const { return masses_[atom]; }
  std::span<const double> masses() const { return masses_; }

  std::vector<double> mean() const;
  double second_moment() const;

 private:
  friend struct Clustering;
  DiscreteLaw() = default;
  std::size_t dim_ = 0;
  std::vector<double> locations_;
  std::vector<double> masses_;
};

// Same dimension, same atom count, locations and masses within tol.
bool approx_equal(const DiscreteLaw& a, const DiscreteLaw& b, double tol);

// A law together with the atom each input value was merged into.
struct Clustering {
  DiscreteLaw law;
  std::vector<std::size_t> atom_of;  // one entry per input value

  // Groups `values` (flat, point-major) carrying `masses`. Masses are
  // normalised by their total.
  static Clustering of(std::size_t dim, std::span<const double> values,
                       std::span<const double> masses);
};

// Conditional law of X on `block`, plus the atom of each block member (in the
// order the members are listed).
Clustering cluster(const RandomVector& X, std::span<const std::size_t> block,
                   const WeightedSpace& space);

// Splits each old point into consecutive children. Children are listed in
// parent order, then child order.
class Refinement {
 public:
  Refinement(std::vector<std::size_t> parent, std::vector<double> child_weight);

  static Refinement identity(const WeightedSpace& space);

  std::size_t size() const { return parent_.size(); }
  std::size_t parent(std::size_t child) const { return parent_[child]; }
  double child_weight(std::size_t child) const { return child_weight_[child]; }
  std::span<const std::size_t> parents() const { return parent_; }
  std::span<const double> child_weights() const { return child_weight_; }
  bool is_identity() const;

  // Refinement from the parent space of *this to the child space of `next`.
  Refinement then(const Refinement& next) const;

 private:
  std::vector<std::size_t> parent_;
  std::vector<double> child_weight_;
};

WeightedSpace refine(const WeightedSpace& space, const Refinement& r);
RandomVector lift(const RandomVector& X, const Refinement& r);
Partition lift(const Partition& A, const Refinement& r);
Filtration lift(const Filtration& F, const Refinement& r);

RandomVector cond_exp(const RandomVector& X, const Partition& A,
                      const WeightedSpace& space);
DiscreteLaw conditional_law(const RandomVector& X,
                            std::span<const std::size_t> block,
                            const WeightedSpace& space);
DiscreteLaw law(const RandomVector& X, const WeightedSpace& space);

double inner(const RandomVector& X, const RandomVector& Y,
             const WeightedSpace& space);
double norm_sq(const RandomVector& X, const WeightedSpace& space);
// E|X| with |.| the Euclidean norm.
double l1_norm(const RandomVector& X, const WeightedSpace& space);
// max over points of |X(w)|.
double sup_norm(const RandomVector& X);
std::vector<double> mean(const RandomVector& X, const WeightedSpace& space);

struct MartingaleDefect {
  double defect = 0.0;
  std::size_t time = 0;   // k where the worst defect occurs
  std::size_t point = 0;
};

// Xs holds X_1..X_K; X_0 = 0. Throws MeasurabilityError when some X_k is not
// constant (within tol) on the blocks of P_k.
MartingaleDefect martingale_defect(std::span<const RandomVector> Xs,
                                   const Filtration& F,
                                   const WeightedSpace& space, double tol);

double is_martingale(std::span<const RandomVector> Xs, const Filtration& F,
                     const WeightedSpace& space, double tol);

}  // namespace indimart
