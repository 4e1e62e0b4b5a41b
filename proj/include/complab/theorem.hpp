#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "complab/spline.hpp"
#include "complab/staircase.hpp"
#include "complab/valid_set.hpp"

namespace complab {

/// Per-coordinate compression of a multivariate staircase: consecutive
/// intervals with equal j-th coordinate merge into one run, so run
/// transitions are exactly the nonzero-difference pairs.
inline StaircaseSpec coordinate_runs(const StaircaseSpec& spec,
                                     std::size_t j) {
  std::vector<Interval> ivs;
  std::vector<Vec> vals;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double y = spec.value(i)[j];
    if (!vals.empty() && vals.back()[0] == y) {
      ivs.back().hi = spec.interval(i).hi;
    } else {
      ivs.push_back(spec.interval(i));
      vals.push_back({y});
    }
  }
  return StaircaseSpec(std::move(ivs), std::move(vals),
                       spec.id() + "/coord" + std::to_string(j));
}

struct TheoremReport {
  std::string spec_id;
  std::size_t n = 0;
  std::size_t k = 0;
  double delta = 0.0;
  double dx = 0.0;
  double epsilon = 0.0;
  AdjacencyStats stats;
  double lower = 0.0;          // Lemma lower bound on a direct predictor
  double upper = 0.0;          // construction upper bound
  double measured = 0.0;       // norm of the actual construction
  double std_norm = 0.0;       // norm of the flat staircase interpolant
  double ratio = 0.0;          // lower / measured
  double theorem_ratio = 0.0;  // N max_j L_j / sum_j U_j(|J_j|+delta|I_j|/dx)
  bool construction_valid = false;
  bool degenerate = false;
};

/// Evaluates the staircase norm-gap quantities: adjacency statistics, the
/// direct-representation lower bound, the construction upper bound, the
/// measured norm of the explicit construction (per-coordinate for k>1), and
/// the predicted ratio. The construction is verified by projection over a
/// dense grid.
inline TheoremReport theorem_report(const StaircaseSpec& spec,
                                    const ValidSet& v, double eps) {
  TheoremReport r;
  r.spec_id = spec.id();
  r.n = spec.size();
  r.k = spec.dim();
  r.delta = spec.gap();
  r.dx = spec.min_interval_len();
  r.epsilon = eps;
  r.stats = adjacency_stats(spec, v);
  r.degenerate = r.stats.degenerate();
  r.lower = std_lower_bound(spec);
  r.upper = base_upper_bound(spec, r.stats);
  if (spec.dim() == 1) r.std_norm = spline_norm(staircase_std_interpolant(spec));

  // Per-coordinate constructions; the multivariate predictor stacks them.
  std::vector<LinearSpline> parts;
  parts.reserve(spec.dim());
  double measured = 0.0;
  for (std::size_t j = 0; j < spec.dim(); ++j) {
    const StaircaseSpec runs = coordinate_runs(spec, j);
    const std::vector<double> cvals = v.coordinate_values(j);
    std::vector<Vec> pts;
    pts.reserve(cvals.size());
    for (double y : cvals) pts.push_back({y});
    const ValidSet vj(std::move(pts));
    if (runs.size() == 1) {
      parts.push_back(LinearSpline::constant(runs.value(0)[0]));
    } else {
      parts.push_back(base_construction(runs, vj, eps));
    }
    measured += spline_norm(parts.back());
  }
  r.measured = measured;
  r.ratio = measured > 0.0 ? r.lower / measured : 0.0;

  const double delta = spec.gap();
  double denom = 0.0;
  for (const AdjacencyStats::Coord& c : r.stats.coords)
    denom += c.max_sep * (static_cast<double>(c.non_adjacent) +
                          (spec.size() > 1
                               ? delta * static_cast<double>(
                                             c.adjacent_effective()) /
                                     spec.min_interval_len()
                               : 0.0));
  r.theorem_ratio =
      denom > 0.0
          ? static_cast<double>(spec.size()) * r.stats.max_min_sep() / denom
          : 0.0;

  // Dense grid verification of project(f_hat(x)) == f_star(x).
  const std::size_t per = std::max<std::size_t>(
      100, (10000 + spec.size() - 1) / spec.size());
  r.construction_valid = true;
  for (std::size_t i = 0; i < spec.size() && r.construction_valid; ++i) {
    const Interval& iv = spec.interval(i);
    const std::size_t want = v.index_of(spec.value(i));
    for (std::size_t g = 0; g <= per; ++g) {
      const double x = iv.lo + iv.length() * static_cast<double>(g) /
                                   static_cast<double>(per);
      Vec y(spec.dim());
      for (std::size_t j = 0; j < spec.dim(); ++j) y[j] = parts[j](x);
      if (project(y, v).index != want) {
        r.construction_valid = false;
        break;
      }
    }
  }
  return r;
}

inline std::string theorem_csv_header() {
  return "spec_id,n,delta,dx,adjacent,non_adjacent,min_sep,max_sep,lower,"
         "upper,measured,ratio,theorem_ratio,valid,degenerate";
}

inline std::string theorem_csv_row(const TheoremReport& r) {
  std::ostringstream os;
  os << r.spec_id << ',' << r.n << ',' << fmt_double(r.delta) << ','
     << fmt_double(r.dx) << ',' << r.stats.total_adjacent() << ','
     << r.stats.total_non_adjacent() << ',' << fmt_double(r.stats.max_min_sep())
     << ',' << fmt_double(r.stats.max_max_sep()) << ',' << fmt_double(r.lower)
     << ',' << fmt_double(r.upper) << ',' << fmt_double(r.measured) << ','
     << fmt_double(r.ratio) << ',' << fmt_double(r.theorem_ratio) << ','
     << (r.construction_valid ? 1 : 0) << ',' << (r.degenerate ? 1 : 0);
  return os.str();
}

}  // namespace complab
