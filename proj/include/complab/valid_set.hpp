#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "complab/common.hpp"

namespace complab {

/// Finite discrete set of valid outputs in R^k. List order is stable and is
/// the tie-breaking order for projection.
class ValidSet {
 public:
  explicit ValidSet(std::vector<Vec> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("ValidSet: empty");
    dim_ = points_[0].size();
    if (dim_ == 0) throw std::invalid_argument("ValidSet: zero dimension");
    for (const Vec& p : points_) {
      if (p.size() != dim_)
        throw std::invalid_argument("ValidSet: inconsistent dimensions");
      if (!all_finite(p))
        throw std::invalid_argument("ValidSet: non-finite coordinate");
    }
    for (std::size_t i = 0; i < points_.size(); ++i)
      for (std::size_t j = i + 1; j < points_.size(); ++j)
        if (points_[i] == points_[j])
          throw std::invalid_argument("ValidSet: duplicate point");
  }

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return dim_; }
  const Vec& point(std::size_t i) const { return points_[i]; }
  const std::vector<Vec>& points() const { return points_; }

  // Exact-membership index, or npos.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t index_of(const Vec& p) const {
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (points_[i] == p) return i;
    return npos;
  }

  // Distinct values of coordinate j, ascending.
  std::vector<double> coordinate_values(std::size_t j) const {
    std::set<double> s;
    for (const Vec& p : points_) s.insert(p[j]);
    return {s.begin(), s.end()};
  }

 private:
  std::vector<Vec> points_;
  std::size_t dim_ = 0;
};

struct Projection {
  std::size_t index;
  Vec point;
};

/// Nearest point of V under the Euclidean metric; exact ties resolve to the
/// lowest list index.
inline Projection project(const Vec& y, const ValidSet& v) {
  if (y.size() != v.dim())
    throw std::invalid_argument("project: dimension mismatch");
  if (!all_finite(y))
    throw std::invalid_argument("project: non-finite coordinate");
  std::size_t best = 0;
  double best_d = squared_distance(y, v.point(0));
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = squared_distance(y, v.point(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return {best, v.point(best)};
}

/// Index i with y in the half-open cell (mid(values[i-1],values[i]),
/// mid(values[i],values[i+1])]; the extreme cells extend to -inf/+inf.
/// A midpoint belongs to the lower cell, matching project's tie-break.
inline std::size_t cell_of(double y, const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("cell_of: empty values");
  if (!std::isfinite(y)) throw std::invalid_argument("cell_of: non-finite y");
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    if (!(values[i] < values[i + 1]))
      throw std::invalid_argument("cell_of: values not strictly ascending");
  std::size_t i = 0;
  while (i + 1 < values.size() && y > 0.5 * (values[i] + values[i + 1])) ++i;
  return i;
}

}  // namespace complab
