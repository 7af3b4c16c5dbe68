#include "indimart/space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "indimart/errors.hpp"

namespace indimart {

namespace {

void require_same_points(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DomainError(std::string(what) + ": defined on " + std::to_string(a) +
                      " points, expected " + std::to_string(b));
  }
}

double distance_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

bool lex_less(std::span<const double> a, std::span<const double> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

// ---------------------------------------------------------------------------
// WeightedSpace

WeightedSpace::WeightedSpace(std::vector<std::string> ids, std::vector<double> weights)
    : ids_(std::move(ids)), weights_(std::move(weights)) {
  if (ids_.empty()) throw InvariantError("space has no points");
  if (ids_.size() != weights_.size()) {
    throw InvariantError("space: " + std::to_string(ids_.size()) + " ids but " +
                         std::to_string(weights_.size()) + " weights");
  }
  double total = 0.0;
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) {
      throw InvariantError("point '" + ids_[i] + "' has non-positive weight");
    }
    if (!index_.emplace(ids_[i], i).second) {
      throw InvariantError("duplicate point id '" + ids_[i] + "'");
    }
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    throw InvariantError("weights sum to " + std::to_string(total) + ", not 1");
  }
}

WeightedSpace WeightedSpace::uniform(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
  return WeightedSpace(std::move(ids), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

std::optional<std::size_t> WeightedSpace::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// RandomVector

RandomVector::RandomVector(std::size_t points, std::size_t dim)
    : dim_(dim), values_(points * dim, 0.0) {
  if (dim == 0) throw DomainError("random vector dimension must be >= 1");
}

RandomVector::RandomVector(std::size_t dim, std::vector<double> flat_values)
    : dim_(dim), values_(std::move(flat_values)) {
  if (dim == 0) throw DomainError("random vector dimension must be >= 1");
  if (values_.size() % dim != 0) {
    throw DomainError("random vector: value count is not a multiple of the dimension");
  }
}

RandomVector RandomVector::operator+(const RandomVector& other) const {
  if (dim_ != other.dim_) throw DomainError("random vector dimension mismatch");
  require_same_points(other.size(), size(), "random vector");
  std::vector<double> out(values_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = values_[i] + other.values_[i];
  return RandomVector(dim_, std::move(out));
}

RandomVector RandomVector::operator-(const RandomVector& other) const {
  if (dim_ != other.dim_) throw DomainError("random vector dimension mismatch");
  require_same_points(other.size(), size(), "random vector");
  std::vector<double> out(values_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = values_[i] - other.values_[i];
  return RandomVector(dim_, std::move(out));
}

RandomVector RandomVector::operator*(double factor) const {
  std::vector<double> out(values_);
  for (double& v : out) v *= factor;
  return RandomVector(dim_, std::move(out));
}

// ---------------------------------------------------------------------------
// Partition

Partition Partition::trivial(std::size_t points) {
  Partition p;
  p.labels_.assign(points, 0);
  p.block_count_ = points == 0 ? 0 : 1;
  return p;
}

Partition Partition::finest(std::size_t points) {
  Partition p;
  p.labels_.resize(points);
  std::iota(p.labels_.begin(), p.labels_.end(), std::size_t{0});
  p.block_count_ = points;
  return p;
}

Partition Partition::from_labels(std::span<const std::size_t> labels) {
  Partition p;
  p.labels_.resize(labels.size());
  std::unordered_map<std::size_t, std::size_t> renumber;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = renumber.emplace(labels[i], renumber.size());
    p.labels_[i] = it->second;
  }
  p.block_count_ = renumber.size();
  return p;
}

Partition Partition::from_blocks(std::size_t points,
                                 const std::vector<std::vector<std::size_t>>& blocks) {
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> labels(points, kUnset);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].empty()) throw InvariantError("partition has an empty block");
    for (std::size_t i : blocks[b]) {
      if (i >= points) throw DomainError("partition block names an unknown point");
      if (labels[i] != kUnset) throw InvariantError("partition blocks overlap");
      labels[i] = b;
    }
  }
  if (std::find(labels.begin(), labels.end(), kUnset) != labels.end()) {
    throw InvariantError("partition blocks do not cover the space");
  }
  return from_labels(labels);
}

std::vector<std::vector<std::size_t>> Partition::blocks() const {
  std::vector<std::vector<std::size_t>> out(block_count_);
  for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(i);
  return out;
}

bool Partition::refines(const Partition& coarser) const {
  if (coarser.size() != size()) return false;
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> image(block_count_, kUnset);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    std::size_t& slot = image[labels_[i]];
    if (slot == kUnset) {
      slot = coarser.labels_[i];
    } else if (slot != coarser.labels_[i]) {
      return false;
    }
  }
  return true;
}

Partition join(const Partition& a, const Partition& b) {
  require_same_points(b.size(), a.size(), "join");
  std::vector<std::size_t> labels(a.size());
  const std::size_t stride = b.block_count();
  for (std::size_t i = 0; i < a.size(); ++i) {
    labels[i] = a.block_of(i) * stride + b.block_of(i);
  }
  return Partition::from_labels(labels);
}

Partition level_sets(const RandomVector& X) {
  std::vector<double> unit(X.size(), 1.0);
  const Clustering c = Clustering::of(X.dim(), X.values(), unit);
  return Partition::from_labels(c.atom_of);
}

// ---------------------------------------------------------------------------
// Filtration

Filtration::Filtration(std::vector<Partition> partitions)
    : partitions_(std::move(partitions)) {
  if (partitions_.size() < 2) throw InvariantError("filtration horizon must be >= 1");
  if (partitions_.front().block_count() != 1) {
    throw InvariantError("P_0 must be the trivial partition");
  }
  for (std::size_t k = 1; k < partitions_.size(); ++k) {
    if (partitions_[k].size() != partitions_[0].size()) {
      throw InvariantError("filtration partitions live on different spaces");
    }
    if (!partitions_[k].refines(partitions_[k - 1])) {
      throw InvariantError("P_" + std::to_string(k) + " does not refine P_" +
                           std::to_string(k - 1));
    }
  }
}

// ---------------------------------------------------------------------------
// DiscreteLaw and clustering

Clustering Clustering::of(std::size_t dim, std::span<const double> values,
                          std::span<const double> masses) {
  const std::size_t n = masses.size();
  if (dim == 0 || values.size() != n * dim) {
    throw DomainError("clustering: values do not match masses and dimension");
  }
  if (n == 0) throw DomainError("law of an empty set of values");
  auto value = [&](std::size_t i) { return values.subspan(i * dim, dim); };

  double total = 0.0;
  for (double m : masses) {
    if (!(m > 0.0) || !std::isfinite(m)) throw InvariantError("atom mass must be positive");
    total += m;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lex_less(value(a), value(b)); });

  // Anchors are created in lexicographic order, so their first coordinates
  // are non-decreasing; only anchors within tol in that coordinate can match.
  const double tol_sq = kMergeTolerance * kMergeTolerance;
  std::vector<std::size_t> anchor;  // input index of each cluster's first member
  std::vector<std::size_t> cluster_of(n);
  for (std::size_t i : order) {
    const auto v = value(i);
    std::size_t found = anchor.size();
    for (std::size_t c = anchor.size(); c-- > 0;) {
      const auto a = value(anchor[c]);
      if (a[0] < v[0] - kMergeTolerance) break;
      if (distance_sq(a, v) < tol_sq) {
        found = c;
        break;
      }
    }
    if (found == anchor.size()) anchor.push_back(i);
    cluster_of[i] = found;
  }

  const std::size_t k = anchor.size();
  std::vector<double> loc(k * dim, 0.0);
  std::vector<double> mass(k, 0.0);
  std::vector<char> exact(k, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = cluster_of[i];
    mass[c] += masses[i];
    const auto v = value(i);
    if (!std::equal(v.begin(), v.end(), value(anchor[c]).begin())) exact[c] = 0;
    for (std::size_t d = 0; d < dim; ++d) loc[c * dim + d] += masses[i] * v[d];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < dim; ++d) loc[c * dim + d] /= mass[c];
    // Members that coincide exactly keep their location.
    if (exact[c]) {
      const auto v = value(anchor[c]);
      std::copy(v.begin(), v.end(), loc.begin() + static_cast<std::ptrdiff_t>(c * dim));
    }
  }

  std::vector<std::size_t> rank(k);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  auto cloc = [&](std::size_t c) { return std::span<const double>(loc).subspan(c * dim, dim); };
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return lex_less(cloc(a), cloc(b)); });
  std::vector<std::size_t> final_index(k);
  for (std::size_t r = 0; r < k; ++r) final_index[rank[r]] = r;

  Clustering out;
  out.law.dim_ = dim;
  out.law.locations_.resize(k * dim);
  out.law.masses_.resize(k);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t c = rank[r];
    out.law.masses_[r] = mass[c] / total;
    std::copy_n(loc.begin() + static_cast<std::ptrdiff_t>(c * dim), dim,
                out.law.locations_.begin() + static_cast<std::ptrdiff_t>(r * dim));
  }
  out.atom_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.atom_of[i] = final_index[cluster_of[i]];
  return out;
}

DiscreteLaw::DiscreteLaw(std::size_t dim, std::vector<double> flat_locations,
                         std::vector<double> masses) {
  double total = 0.0;
  for (double m : masses) total += m;
  if (!masses.empty() && std::abs(total - 1.0) > kWeightTolerance) {
    throw InvariantError("law masses sum to " + std::to_string(total) + ", not 1");
  }
  *this = Clustering::of(dim, flat_locations, masses).law;
}

DiscreteLaw DiscreteLaw::point_mass(std::vector<double> location) {
  const std::size_t dim = location.size();
  return DiscreteLaw(dim, std::move(location), {1.0});
}

std::vector<double> DiscreteLaw::mean() const {
  std::vector<double> out(dim_, 0.0);
  for (std::size_t a = 0; a < size(); ++a) {
    for (std::size_t d = 0; d < dim_; ++d) out[d] += masses_[a] * locations_[a * dim_ + d];
  }
  return out;
}

double DiscreteLaw::second_moment() const {
  double s = 0.0;
  for (std::size_t a = 0; a < size(); ++a) {
    double r = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) r += locations_[a * dim_ + d] * locations_[a * dim_ + d];
    s += masses_[a] * r;
  }
  return s;
}

bool approx_equal(const DiscreteLaw& a, const DiscreteLaw& b, double tol) {
  if (a.dim() != b.dim() || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a.mass(i) - b.mass(i)) > tol) return false;
    if (std::sqrt(distance_sq(a.location(i), b.location(i))) > tol) return false;
  }
  return true;
}

Clustering cluster(const RandomVector& X, std::span<const std::size_t> block,
                   const WeightedSpace& space) {
  require_same_points(X.size(), space.size(), "cluster");
  if (block.empty()) throw DomainError("conditional law on an empty block");
  const std::size_t m = X.dim();
  std::vector<double> values(block.size() * m);
  std::vector<double> masses(block.size());
  for (std::size_t j = 0; j < block.size(); ++j) {
    const std::size_t i = block[j];
    if (i >= space.size()) throw DomainError("block names a point outside the space");
    const auto v = X.at(i);
    std::copy(v.begin(), v.end(), values.begin() + static_cast<std::ptrdiff_t>(j * m));
    masses[j] = space.weight(i);
  }
  return Clustering::of(m, values, masses);
}

// ---------------------------------------------------------------------------
// Refinement

Refinement::Refinement(std::vector<std::size_t> parent, std::vector<double> child_weight)
    : parent_(std::move(parent)), child_weight_(std::move(child_weight)) {
  if (parent_.size() != child_weight_.size()) {
    throw InvariantError("refinement: parent and weight lists differ in length");
  }
  for (std::size_t i = 0; i < parent_.size(); ++i) {
    if (!(child_weight_[i] > 0.0)) throw InvariantError("refinement: child weight must be positive");
    if (i > 0 && parent_[i] < parent_[i - 1]) {
      throw InvariantError("refinement: children must be listed in parent order");
    }
  }
}

Refinement Refinement::identity(const WeightedSpace& space) {
  std::vector<std::size_t> parent(space.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  return Refinement(std::move(parent), std::vector<double>(space.weights().begin(), space.weights().end()));
}

bool Refinement::is_identity() const {
  for (std::size_t i = 0; i < parent_.size(); ++i) {
    if (parent_[i] != i) return false;
  }
  return true;
}

Refinement Refinement::then(const Refinement& next) const {
  std::vector<std::size_t> parent(next.size());
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (next.parent(i) >= size()) throw DomainError("refinement composition: unknown parent");
    parent[i] = parent_[next.parent(i)];
  }
  return Refinement(std::move(parent),
                    std::vector<double>(next.child_weight_.begin(), next.child_weight_.end()));
}

WeightedSpace refine(const WeightedSpace& space, const Refinement& r) {
  const std::size_t n = space.size();
  std::vector<double> sums(n, 0.0);
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r.parent(i) >= n) throw DomainError("refinement names an unknown parent");
    sums[r.parent(i)] += r.child_weight(i);
    ++counts[r.parent(i)];
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (counts[p] == 0) {
      throw InvariantError("refinement drops point '" + space.id(p) + "'");
    }
    if (std::abs(sums[p] - space.weight(p)) > kWeightTolerance) {
      throw InvariantError("refinement does not conserve the weight of '" + space.id(p) + "'");
    }
  }

  std::unordered_set<std::string> used(space.ids().begin(), space.ids().end());
  std::vector<std::string> ids(r.size());
  std::size_t i = 0;
  while (i < r.size()) {
    const std::size_t p = r.parent(i);
    if (counts[p] == 1) {
      ids[i] = space.id(p);
      ++i;
      continue;
    }
    for (std::size_t c = 0; c < counts[p]; ++c, ++i) {
      std::string id = space.id(p) + "." + std::to_string(c);
      while (used.count(id) != 0) id += "'";
      used.insert(id);
      ids[i] = std::move(id);
    }
  }
  return WeightedSpace(std::move(ids),
                       std::vector<double>(r.child_weights().begin(), r.child_weights().end()));
}

RandomVector lift(const RandomVector& X, const Refinement& r) {
  const std::size_t m = X.dim();
  std::vector<double> out(r.size() * m);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r.parent(i) >= X.size()) throw DomainError("lift: unknown parent");
    const auto v = X.at(r.parent(i));
    std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(i * m));
  }
  return RandomVector(m, std::move(out));
}

Partition lift(const Partition& A, const Refinement& r) {
  std::vector<std::size_t> labels(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r.parent(i) >= A.size()) throw DomainError("lift: unknown parent");
    labels[i] = A.block_of(r.parent(i));
  }
  return Partition::from_labels(labels);
}

Filtration lift(const Filtration& F, const Refinement& r) {
  std::vector<Partition> parts;
  parts.reserve(F.partitions().size());
  for (const Partition& p : F.partitions()) parts.push_back(lift(p, r));
  return Filtration(std::move(parts));
}

// ---------------------------------------------------------------------------
// Expectations and norms

RandomVector cond_exp(const RandomVector& X, const Partition& A, const WeightedSpace& space) {
  require_same_points(X.size(), space.size(), "cond_exp: random vector");
  require_same_points(A.size(), space.size(), "cond_exp: partition");
  const std::size_t m = X.dim();
  std::vector<double> block_mass(A.block_count(), 0.0);
  std::vector<double> block_sum(A.block_count() * m, 0.0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::size_t b = A.block_of(i);
    const double w = space.weight(i);
    block_mass[b] += w;
    const auto v = X.at(i);
    for (std::size_t d = 0; d < m; ++d) block_sum[b * m + d] += w * v[d];
  }
  std::vector<double> out(space.size() * m);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::size_t b = A.block_of(i);
    for (std::size_t d = 0; d < m; ++d) out[i * m + d] = block_sum[b * m + d] / block_mass[b];
  }
  return RandomVector(m, std::move(out));
}

DiscreteLaw conditional_law(const RandomVector& X, std::span<const std::size_t> block,
                            const WeightedSpace& space) {
  return cluster(X, block, space).law;
}

DiscreteLaw law(const RandomVector& X, const WeightedSpace& space) {
  std::vector<std::size_t> all(space.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return conditional_law(X, all, space);
}

double inner(const RandomVector& X, const RandomVector& Y, const WeightedSpace& space) {
  require_same_points(X.size(), space.size(), "inner");
  require_same_points(Y.size(), space.size(), "inner");
  if (X.dim() != Y.dim()) throw DomainError("inner: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto x = X.at(i);
    const auto y = Y.at(i);
    double dot = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) dot += x[d] * y[d];
    s += space.weight(i) * dot;
  }
  return s;
}

double norm_sq(const RandomVector& X, const WeightedSpace& space) {
  require_same_points(X.size(), space.size(), "norm");
  double s = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    double r = 0.0;
    for (double v : X.at(i)) r += v * v;
    s += space.weight(i) * r;
  }
  return s;
}

double l1_norm(const RandomVector& X, const WeightedSpace& space) {
  require_same_points(X.size(), space.size(), "l1 norm");
  double s = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    double r = 0.0;
    for (double v : X.at(i)) r += v * v;
    s += space.weight(i) * std::sqrt(r);
  }
  return s;
}

double sup_norm(const RandomVector& X) {
  double best = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double r = 0.0;
    for (double v : X.at(i)) r += v * v;
    best = std::max(best, r);
  }
  return std::sqrt(best);
}

std::vector<double> mean(const RandomVector& X, const WeightedSpace& space) {
  require_same_points(X.size(), space.size(), "mean");
  std::vector<double> out(X.dim(), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto v = X.at(i);
    for (std::size_t d = 0; d < v.size(); ++d) out[d] += space.weight(i) * v[d];
  }
  return out;
}

MartingaleDefect martingale_defect(std::span<const RandomVector> Xs, const Filtration& F,
                                   const WeightedSpace& space, double tol) {
  if (Xs.size() != F.horizon()) {
    throw DomainError("martingale: " + std::to_string(Xs.size()) + " values for horizon " +
                      std::to_string(F.horizon()));
  }
  require_same_points(F.points(), space.size(), "martingale: filtration");
  MartingaleDefect worst;
  const std::size_t m = Xs.empty() ? 1 : Xs.front().dim();
  RandomVector previous(space.size(), m);
  for (std::size_t k = 1; k <= Xs.size(); ++k) {
    const RandomVector& X = Xs[k - 1];
    if (X.dim() != m) throw DomainError("martingale: dimension changes over time");
    require_same_points(X.size(), space.size(), "martingale");

    const RandomVector own = cond_exp(X, F.at(k), space);
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (std::sqrt(distance_sq(own.at(i), X.at(i))) > tol) {
        throw MeasurabilityError("X_" + std::to_string(k) + " is not constant on the P_" +
                                 std::to_string(k) + " block of point '" + space.id(i) + "'");
      }
    }
    const RandomVector predicted = cond_exp(X, F.at(k - 1), space);
    for (std::size_t i = 0; i < space.size(); ++i) {
      const double d = std::sqrt(distance_sq(predicted.at(i), previous.at(i)));
      if (d > worst.defect) worst = MartingaleDefect{d, k, i};
    }
    previous = X;
  }
  return worst;
}

double is_martingale(std::span<const RandomVector> Xs, const Filtration& F,
                     const WeightedSpace& space, double tol) {
  return martingale_defect(Xs, F, space, tol).defect;
}

}  // namespace indimart
