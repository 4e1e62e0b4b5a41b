#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "complab/common.hpp"
#include "complab/valid_set.hpp"

namespace complab {

struct Interval {
  double lo, hi;
  double length() const { return hi - lo; }
};

/// Piecewise-constant target on N disjoint intervals with a constant gap
/// delta between consecutive intervals; interval i carries value values[i]
/// in R^k.
class StaircaseSpec {
 public:
  StaircaseSpec(std::vector<Interval> intervals, std::vector<Vec> values,
                std::string id = "")
      : intervals_(std::move(intervals)),
        values_(std::move(values)),
        id_(std::move(id)) {
    const std::size_t n = intervals_.size();
    if (n == 0) throw std::invalid_argument("StaircaseSpec: empty");
    if (values_.size() != n)
      throw std::invalid_argument("StaircaseSpec: values/intervals mismatch");
    dim_ = values_[0].size();
    for (const Vec& v : values_) {
      if (v.size() != dim_ || !all_finite(v))
        throw std::invalid_argument("StaircaseSpec: bad value vector");
    }
    min_len_ = intervals_[0].length();
    for (const Interval& iv : intervals_) {
      if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo < iv.hi))
        throw std::invalid_argument("StaircaseSpec: degenerate interval");
      min_len_ = std::min(min_len_, iv.length());
    }
    if (n > 1) {
      gap_ = intervals_[1].lo - intervals_[0].hi;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double g = intervals_[i + 1].lo - intervals_[i].hi;
        if (!(g > 0.0))
          throw std::invalid_argument("StaircaseSpec: intervals not disjoint");
        if (std::abs(g - gap_) > 1e-9 * std::max(1.0, std::abs(gap_)))
          throw std::invalid_argument("StaircaseSpec: gap not constant");
        if (values_[i] == values_[i + 1])
          throw std::invalid_argument(
              "StaircaseSpec: consecutive values equal");
      }
    } else {
      gap_ = 0.0;  // no consecutive pair; unused
    }
  }

  std::size_t size() const { return intervals_.size(); }
  std::size_t dim() const { return dim_; }
  double gap() const { return gap_; }
  double min_interval_len() const { return min_len_; }
  const std::string& id() const { return id_; }
  const Interval& interval(std::size_t i) const { return intervals_[i]; }
  const Vec& value(std::size_t i) const { return values_[i]; }
  const std::vector<Interval>& intervals() const { return intervals_; }
  const std::vector<Vec>& values() const { return values_; }

  double domain_lo() const { return intervals_.front().lo; }
  double domain_hi() const { return intervals_.back().hi; }

  // Index of the interval containing x, or npos when x is in a gap/outside.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t interval_containing(double x) const {
    for (std::size_t i = 0; i < intervals_.size(); ++i)
      if (x >= intervals_[i].lo && x <= intervals_[i].hi) return i;
    return npos;
  }

  // Scalar values of output coordinate j along the staircase.
  std::vector<double> coordinate_track(std::size_t j) const {
    std::vector<double> t(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) t[i] = values_[i][j];
    return t;
  }

 private:
  std::vector<Interval> intervals_;
  std::vector<Vec> values_;
  std::string id_;
  std::size_t dim_ = 0;
  double gap_ = 0.0;
  double min_len_ = 0.0;
};

/// Per-coordinate adjacency statistics over consecutive staircase values.
/// A pair (i, i+1) is adjacent in coordinate j iff no point of V has its
/// j-th coordinate strictly between the two values. Pairs whose j-th
/// coordinates coincide count as adjacent (nothing lies strictly between)
/// but are tracked separately: they are excluded from L_j/U_j and from the
/// adjacent count used in norm bounds.
struct AdjacencyStats {
  struct Coord {
    std::size_t adjacent = 0;      // |I_j|, includes zero-difference pairs
    std::size_t non_adjacent = 0;  // |J_j|
    std::size_t zero_diff = 0;     // pairs with equal j-th coordinates
    double min_sep = 0.0;          // L_j over nonzero differences (0 if none)
    double max_sep = 0.0;          // U_j over nonzero differences (0 if none)
    bool has_sep = false;

    std::size_t adjacent_effective() const { return adjacent - zero_diff; }
  };

  std::size_t n = 0;  // staircase length N
  std::vector<Coord> coords;

  bool degenerate() const {
    for (const Coord& c : coords)
      if (c.zero_diff > 0) return true;
    return false;
  }
  double max_min_sep() const {
    double m = 0.0;
    for (const Coord& c : coords) m = std::max(m, c.min_sep);
    return m;
  }
  double max_max_sep() const {
    double m = 0.0;
    for (const Coord& c : coords) m = std::max(m, c.max_sep);
    return m;
  }
  std::size_t total_adjacent() const {
    std::size_t s = 0;
    for (const Coord& c : coords) s += c.adjacent;
    return s;
  }
  std::size_t total_non_adjacent() const {
    std::size_t s = 0;
    for (const Coord& c : coords) s += c.non_adjacent;
    return s;
  }
};

inline AdjacencyStats adjacency_stats(const StaircaseSpec& spec,
                                      const ValidSet& v) {
  if (spec.dim() != v.dim())
    throw std::invalid_argument("adjacency_stats: dimension mismatch");
  for (std::size_t i = 0; i < spec.size(); ++i)
    if (v.index_of(spec.value(i)) == ValidSet::npos)
      throw std::invalid_argument("adjacency_stats: spec value not in V");

  AdjacencyStats st;
  st.n = spec.size();
  st.coords.resize(spec.dim());
  for (std::size_t j = 0; j < spec.dim(); ++j) {
    AdjacencyStats::Coord& c = st.coords[j];
    for (std::size_t i = 0; i + 1 < spec.size(); ++i) {
      const double a = spec.value(i)[j];
      const double b = spec.value(i + 1)[j];
      if (a == b) {
        ++c.adjacent;
        ++c.zero_diff;
        continue;
      }
      const double lo = std::min(a, b), hi = std::max(a, b);
      bool blocked = false;
      for (const Vec& p : v.points())
        if (p[j] > lo && p[j] < hi) {
          blocked = true;
          break;
        }
      blocked ? ++c.non_adjacent : ++c.adjacent;
      const double sep = hi - lo;
      if (!c.has_sep) {
        c.min_sep = c.max_sep = sep;
        c.has_sep = true;
      } else {
        c.min_sep = std::min(c.min_sep, sep);
        c.max_sep = std::max(c.max_sep, sep);
      }
    }
  }
  return st;
}

}  // namespace complab
