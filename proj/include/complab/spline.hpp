#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "complab/common.hpp"
#include "complab/staircase.hpp"
#include "complab/valid_set.hpp"

namespace complab {

/// Continuous piecewise-linear univariate function: ascending knots plus
/// extrapolation slopes beyond the end knots.
class LinearSpline {
 public:
  struct Knot {
    double x, y;
  };

  LinearSpline(std::vector<Knot> knots, double left_slope, double right_slope)
      : knots_(std::move(knots)),
        left_slope_(left_slope),
        right_slope_(right_slope) {
    if (knots_.empty()) throw std::invalid_argument("LinearSpline: no knots");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      if (!std::isfinite(knots_[i].x) || !std::isfinite(knots_[i].y))
        throw std::invalid_argument("LinearSpline: non-finite knot");
      if (i > 0 && !(knots_[i - 1].x < knots_[i].x))
        throw std::invalid_argument("LinearSpline: knots not ascending");
    }
    if (!std::isfinite(left_slope_) || !std::isfinite(right_slope_))
      throw std::invalid_argument("LinearSpline: non-finite slope");
  }

  static LinearSpline line(double slope, double intercept) {
    return LinearSpline({{0.0, intercept}}, slope, slope);
  }
  static LinearSpline constant(double c) { return line(0.0, c); }

  const std::vector<Knot>& knots() const { return knots_; }
  double left_slope() const { return left_slope_; }
  double right_slope() const { return right_slope_; }

  double operator()(double x) const {
    if (x <= knots_.front().x)
      return knots_.front().y + left_slope_ * (x - knots_.front().x);
    if (x >= knots_.back().x)
      return knots_.back().y + right_slope_ * (x - knots_.back().x);
    // first knot with knot.x >= x
    std::size_t hi = 1;
    while (knots_[hi].x < x) ++hi;
    const Knot& a = knots_[hi - 1];
    const Knot& b = knots_[hi];
    const double t = (x - a.x) / (b.x - a.x);
    return a.y + t * (b.y - a.y);
  }

  // Slope sequence left-to-right: extrapolation slope, one slope per knot
  // segment, extrapolation slope.
  std::vector<double> slope_sequence() const {
    std::vector<double> s;
    s.reserve(knots_.size() + 1);
    s.push_back(left_slope_);
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
      s.push_back((knots_[i + 1].y - knots_[i].y) /
                  (knots_[i + 1].x - knots_[i].x));
    s.push_back(right_slope_);
    return s;
  }

 private:
  std::vector<Knot> knots_;
  double left_slope_, right_slope_;
};

/// Function norm of a linear spline: half the max of the total variation of
/// the slope sequence (including the transitions from/to the extrapolation
/// slopes) and |f'(-inf) + f'(+inf)|.
inline double spline_norm(const LinearSpline& f) {
  const std::vector<double> s = f.slope_sequence();
  double tv = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) tv += std::abs(s[i + 1] - s[i]);
  return 0.5 * std::max(tv, std::abs(f.left_slope() + f.right_slope()));
}

/// Flat-on-intervals interpolant of a univariate staircase: slope 0 on each
/// interval, slope (y_{i+1}-y_i)/delta on each gap, end slopes 0. Its norm
/// is exactly sum_i |y_{i+1}-y_i| / delta.
inline LinearSpline staircase_std_interpolant(const StaircaseSpec& spec) {
  if (spec.dim() != 1)
    throw std::invalid_argument("staircase_std_interpolant: needs k=1");
  std::vector<LinearSpline::Knot> knots;
  knots.reserve(2 * spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double y = spec.value(i)[0];
    knots.push_back({spec.interval(i).lo, y});
    knots.push_back({spec.interval(i).hi, y});
  }
  return LinearSpline(std::move(knots), 0.0, 0.0);
}

/// Lower bound on the norm of any predictor representing the staircase
/// directly: per coordinate, sum_i |y_{i+1,j}-y_{i,j}| / delta; for k>1 the
/// max over coordinates.
inline double std_lower_bound(const StaircaseSpec& spec) {
  if (spec.size() < 2) return 0.0;
  double best = 0.0;
  for (std::size_t j = 0; j < spec.dim(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < spec.size(); ++i)
      sum += std::abs(spec.value(i + 1)[j] - spec.value(i)[j]);
    best = std::max(best, sum / spec.gap());
  }
  return best;
}

/// Upper bound on the minimum base-predictor norm, per coordinate
/// max(|J_j| U_j / delta + |I_j| U_j / dx, U_j / dx); for k>1 the sum over
/// coordinates. Zero-difference pairs contribute to neither term.
inline double base_upper_bound(const StaircaseSpec& spec,
                               const AdjacencyStats& stats) {
  if (spec.size() < 2) return 0.0;
  const double delta = spec.gap();
  const double dx = spec.min_interval_len();
  double total = 0.0;
  for (const AdjacencyStats::Coord& c : stats.coords) {
    const double u = c.max_sep;  // 0 when the coordinate never moves
    const double b = std::max(
        static_cast<double>(c.non_adjacent) * u / delta +
            static_cast<double>(c.adjacent_effective()) * u / dx,
        u / dx);
    total += b;
  }
  return total;
}

namespace detail {

// Open cell interval of a value inside sorted distinct `values`; extremes
// extend to +-inf.
struct Cell {
  double lo, hi;  // f projects to this value on (lo, hi]
};

inline Cell cell_bounds(std::size_t idx, const std::vector<double>& values) {
  Cell c;
  c.lo = idx == 0 ? -std::numeric_limits<double>::infinity()
                  : 0.5 * (values[idx - 1] + values[idx]);
  c.hi = idx + 1 == values.size()
             ? std::numeric_limits<double>::infinity()
             : 0.5 * (values[idx] + values[idx + 1]);
  return c;
}

inline double min_finite_cell_width(const std::vector<double>& values) {
  if (values.size() < 3) return std::numeric_limits<double>::infinity();
  double w = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < values.size(); ++i)
    w = std::min(w, 0.5 * (values[i + 1] - values[i - 1]));
  return w;
}

}  // namespace detail

/// Explicit low-norm construction f_hat with project(f_hat(x)) = f_star(x)
/// on every interval of the staircase. Interval segments pass through their
/// projection cells; adjacent pairs cross the shared cell boundary at the
/// middle of the input gap, non-adjacent crossings stay eps strictly inside
/// their cells at interval endpoints. Direction changes ride flat segments
/// near the cell boundary facing the neighbors.
inline LinearSpline base_construction(const StaircaseSpec& spec,
                                      const ValidSet& v, double eps) {
  if (spec.dim() != 1 || v.dim() != 1)
    throw std::invalid_argument("base_construction: needs k=1");
  const std::size_t n = spec.size();
  const std::vector<double> vals = v.coordinate_values(0);

  std::vector<std::size_t> cell_idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = spec.value(i)[0];
    const auto it = std::lower_bound(vals.begin(), vals.end(), y);
    if (it == vals.end() || *it != y)
      throw std::invalid_argument("base_construction: spec value not in V");
    cell_idx[i] = static_cast<std::size_t>(it - vals.begin());
  }

  const double w = detail::min_finite_cell_width(vals);
  if (!(eps > 0.0) || !(eps < 0.5 * w))
    throw std::invalid_argument(
        "base_construction: eps must be in (0, half the minimum cell width)");

  if (n == 1) {
    const double y = spec.value(0)[0];
    return LinearSpline(
        {{spec.interval(0).lo, y}, {spec.interval(0).hi, y}}, 0.0, 0.0);
  }

  // Pair (i, i+1) is adjacent iff the two values are neighbors in V.
  std::vector<bool> adj(n - 1);
  std::vector<int> dir(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    adj[i] = (cell_idx[i + 1] == cell_idx[i] + 1) ||
             (cell_idx[i] == cell_idx[i + 1] + 1);
    dir[i] = spec.value(i + 1)[0] > spec.value(i)[0] ? +1 : -1;
  }

  // Middle of the gap between intervals i and i+1; symmetric expression so
  // both sides of a shared knot compute the identical double.
  auto gap_mid = [&](std::size_t i) {
    return 0.5 * (spec.interval(i).hi + spec.interval(i + 1).lo);
  };

  // Anchor of interval i on its entry (toward i-1) or exit (toward i+1)
  // side. `rising` is the crossing direction at that side.
  auto anchor = [&](std::size_t i, bool exit_side) -> LinearSpline::Knot {
    const detail::Cell c = detail::cell_bounds(cell_idx[i], vals);
    const bool rising = exit_side ? dir[i] > 0 : dir[i - 1] > 0;
    const bool adjacent = exit_side ? adj[i] : adj[i - 1];
    // Place toward the boundary being crossed: top for an upward crossing
    // at this side, bottom for a downward one.
    const bool toward_top = exit_side ? rising : !rising;
    if (adjacent) {
      const double x = exit_side ? gap_mid(i) : gap_mid(i - 1);
      return {x, toward_top ? c.hi : c.lo};  // exact shared boundary, not in X
    }
    const double x = exit_side ? spec.interval(i).hi : spec.interval(i).lo;
    return {x, toward_top ? c.hi - eps : c.lo + eps};
  };

  std::vector<LinearSpline::Knot> knots;
  auto push = [&](LinearSpline::Knot k) {
    if (!knots.empty() && k.x == knots.back().x) return;  // shared boundary
    knots.push_back(k);
  };

  for (std::size_t i = 0; i < n; ++i) {
    const bool first = i == 0, last = i + 1 == n;
    if (!first) push(anchor(i, false));
    if (!first && !last) {
      // Change of direction with exact boundaries on both sides needs an
      // interior bump to stay strictly inside the cell on the interval.
      const bool turn = dir[i - 1] != dir[i];
      if (turn && adj[i - 1] && adj[i]) {
        const detail::Cell c = detail::cell_bounds(cell_idx[i], vals);
        const double mid =
            0.5 * (spec.interval(i).lo + spec.interval(i).hi);
        const double y = dir[i - 1] > 0 ? c.lo + eps : c.hi - eps;
        push({mid, y});
      }
    }
    if (!last) push(anchor(i, true));
  }

  // Free end knots: flat from the inner anchor or collinear with the inner
  // segment, whichever yields the smaller norm while staying in the cell.
  auto strictly_inside = [&](double y, std::size_t i) {
    const detail::Cell c = detail::cell_bounds(cell_idx[i], vals);
    return y > c.lo && y < c.hi;
  };

  struct EndChoice {
    double knot_y;
    double slope;  // extrapolation slope
  };
  auto end_candidates = [&](bool left) {
    std::vector<EndChoice> cs;
    const LinearSpline::Knot inner = left ? knots.front() : knots.back();
    const std::size_t iv = left ? 0 : n - 1;
    const double x_outer =
        left ? spec.interval(0).lo : spec.interval(n - 1).hi;
    // flat: hold the inner anchor height (nudged inside when the anchor sits
    // on a shared boundary in the gap)
    double flat_y = inner.y;
    if (!strictly_inside(flat_y, iv))
      flat_y += spec.value(iv)[0] > inner.y ? eps : -eps;
    cs.push_back({flat_y, 0.0});
    if (knots.size() < 2) return cs;
    const LinearSpline::Knot next =
        left ? knots[1] : knots[knots.size() - 2];
    const double seg_slope = (next.y - inner.y) / (next.x - inner.x);
    // collinear: extend the inner segment through the end interval
    const double col_y = inner.y + seg_slope * (x_outer - inner.x);
    if (strictly_inside(col_y, iv) && x_outer != inner.x) {
      cs.push_back({col_y, seg_slope});
      cs.push_back({col_y, 0.0});
    }
    cs.push_back({flat_y, seg_slope});
    return cs;
  };

  const auto left_cs = end_candidates(true);
  const auto right_cs = end_candidates(false);
  std::optional<LinearSpline> best;
  // End choices minimize the slope total variation first (an end slope equal
  // to the adjacent interior slope beats a flat one when it removes a
  // transition), with the full norm as tiebreak.
  double best_tv = 0.0, best_norm = 0.0;
  for (const EndChoice& lc : left_cs) {
    for (const EndChoice& rc : right_cs) {
      std::vector<LinearSpline::Knot> ks;
      ks.reserve(knots.size() + 2);
      if (spec.interval(0).lo < knots.front().x)
        ks.push_back({spec.interval(0).lo, lc.knot_y});
      for (const auto& k : knots) ks.push_back(k);
      if (spec.interval(n - 1).hi > knots.back().x)
        ks.push_back({spec.interval(n - 1).hi, rc.knot_y});
      LinearSpline cand(std::move(ks), lc.slope, rc.slope);
      // cheap validity screen on the end intervals before the full grid check
      bool ok = true;
      for (std::size_t s : {std::size_t{0}, n - 1}) {
        const Interval& ivl = spec.interval(s);
        for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
          const double x = ivl.lo + t * ivl.length();
          if (cell_of(cand(x), vals) != cell_idx[s]) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
      }
      if (!ok) continue;
      const std::vector<double> seq = cand.slope_sequence();
      double tv = 0.0;
      for (std::size_t s = 0; s + 1 < seq.size(); ++s)
        tv += std::abs(seq[s + 1] - seq[s]);
      const double nm = spline_norm(cand);
      if (!best || tv < best_tv - 1e-15 ||
          (tv <= best_tv + 1e-15 && nm < best_norm)) {
        best = std::move(cand);
        best_tv = tv;
        best_norm = nm;
      }
    }
  }
  if (!best) throw std::logic_error("base_construction: no valid end choice");
  return *best;
}

/// Check project(f(x)) == f_star(x) over a dense grid inside the staircase
/// domain: max(100 per interval, ~10^4 total). Univariate form.
inline bool verify_construction(const LinearSpline& f,
                                const StaircaseSpec& spec, const ValidSet& v) {
  const std::vector<double> vals = v.coordinate_values(0);
  const std::size_t per =
      std::max<std::size_t>(100, (10000 + spec.size() - 1) / spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const Interval& iv = spec.interval(i);
    const double target = spec.value(i)[0];
    for (std::size_t g = 0; g <= per; ++g) {
      const double x =
          iv.lo + iv.length() * static_cast<double>(g) / static_cast<double>(per);
      if (vals[cell_of(f(x), vals)] != target) return false;
    }
  }
  return true;
}

}  // namespace complab
