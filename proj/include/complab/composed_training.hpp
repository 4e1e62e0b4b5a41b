#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "complab/common.hpp"
#include "complab/relu_net.hpp"
#include "complab/staircase.hpp"
#include "complab/valid_set.hpp"

namespace complab {

/// Pre-trained denoiser with its parameters locked. Composed training reads
/// it but must never write it; the hash makes violations detectable.
class FrozenDenoiser {
 public:
  explicit FrozenDenoiser(ReluNet2 net)
      : net_(std::move(net)), hash_(net_.param_hash()) {}

  const ReluNet2& net() const { return net_; }
  std::uint64_t hash() const { return hash_; }
  bool intact() const { return net_.param_hash() == hash_; }

  Vec denoise(const Vec& y) const { return net_.eval(y); }

 private:
  ReluNet2 net_;
  std::uint64_t hash_;
};

struct ComposedConfig {
  double lambda = 0.0;          // direct-loss weight
  double sigma = 0.3;           // corruption scale, in cell widths
  std::size_t denoiser_passes = 8;  // corrupted copies of the unlabeled set
  double denoiser_ridge = 1e-6;
  std::size_t base_epochs = 3000;
  std::uint64_t seed = 0;
  double ood_extension = 1.0;   // domain widths appended on each side

  std::size_t denoiser_hidden = 256;
  std::size_t base_hidden = 24;
  std::size_t n_unlabeled = 512;
  std::size_t n_train = 96;
  std::size_t n_val = 32;
  std::size_t n_test = 64;
  std::size_t n_ood = 128;
  double lr = 0.02;
  double momentum = 0.9;
  // L2 strength is tuned per arm on the validation split, as in the image
  // experiment protocol.
  std::vector<double> weight_decay_grid = {1e-4, 1e-3, 1e-2};
  std::size_t eval_every = 10;  // early-stopping cadence
  std::size_t n_seeds = 1;
};

/// Train a k->k regressor from corrupted samples back to clean valid
/// outputs, then freeze it. Noise is redrawn every epoch from the seeded
/// stream.
inline FrozenDenoiser pretrain_denoiser(const std::vector<Vec>& unlabeled,
                                        double sigma,
                                        const ComposedConfig& cfg) {
  if (unlabeled.empty())
    throw std::invalid_argument("pretrain_denoiser: no unlabeled outputs");
  if (!(sigma > 0.0))
    throw std::invalid_argument("pretrain_denoiser: sigma must be positive");
  const std::size_t k = unlabeled.front().size();
  // First-layer kinks spread across the observed value range; a generic
  // small-weight init leaves the whole range inside one linear region and
  // the regression collapses to the identity.
  ReluNet2 net = ReluNet2::zeros(k, k, cfg.denoiser_hidden);
  {
    Rng init(Rng::derive(cfg.seed, 101));
    Vec lo = unlabeled.front(), hi = unlabeled.front();
    for (const Vec& y : unlabeled)
      for (std::size_t j = 0; j < k; ++j) {
        lo[j] = std::min(lo[j], y[j]);
        hi[j] = std::max(hi[j], y[j]);
      }
    const std::size_t h = cfg.denoiser_hidden;
    for (std::size_t l = 0; l < h; ++l) {
      const std::size_t j = l % k;  // input coordinate this unit watches
      const double sign = l % 2 == 0 ? 1.0 : -1.0;
      const double pad = 0.5 + 0.05 * (hi[j] - lo[j]);
      const double kink = init.uniform(lo[j] - pad, hi[j] + pad);
      const double scale = 1.0 / std::max(1.0, hi[j] - lo[j] + 2.0 * pad);
      net.w1[l * k + j] = sign * scale;
      net.b1[l] = -sign * scale * kink;  // unit activations stay O(1)
      for (std::size_t o = 0; o < k; ++o)
        net.w2[o * h + l] = init.uniform(-0.05, 0.05);
    }
    for (std::size_t o = 0; o < k; ++o) net.b2[o] = 0.0;
  }
  // Second layer fit in closed form (ridge regression on the fixed ReLU
  // features). Each pass adds one corrupted copy of every unlabeled output.
  Rng noise(Rng::derive(cfg.seed, 102));
  const std::size_t passes = std::max<std::size_t>(1, cfg.denoiser_passes);
  const std::size_t h = cfg.denoiser_hidden;
  const std::size_t m = h + 1;  // bias feature
  std::vector<double> gram(m * m, 0.0);
  std::vector<std::vector<double>> rhs(k, std::vector<double>(m, 0.0));
  Vec feat(m);
  for (std::size_t p = 0; p < passes; ++p) {
    for (const Vec& y : unlabeled) {
      Vec x = y;
      for (double& c : x) c += noise.gaussian(0.0, sigma);
      const Vec act = net.hidden_act(x);
      for (std::size_t l = 0; l < h; ++l) feat[l] = act[l];
      feat[h] = 1.0;
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a; b < m; ++b) gram[a * m + b] += feat[a] * feat[b];
        for (std::size_t o = 0; o < k; ++o) rhs[o][a] += feat[a] * y[o];
      }
    }
  }
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < a; ++b) gram[a * m + b] = gram[b * m + a];
    gram[a * m + a] += cfg.denoiser_ridge;
  }
  // Cholesky factorization and solve, in place.
  std::vector<double> chol = gram;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      double s = chol[a * m + b];
      for (std::size_t t = 0; t < a; ++t) s -= chol[t * m + a] * chol[t * m + b];
      if (a == b) {
        if (s <= 0.0)
          throw std::runtime_error("pretrain_denoiser: singular feature gram");
        chol[a * m + a] = std::sqrt(s);
      } else {
        chol[a * m + b] = s / chol[a * m + a];
      }
    }
  }
  for (std::size_t o = 0; o < k; ++o) {
    std::vector<double>& w = rhs[o];
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t t = 0; t < a; ++t) w[a] -= chol[t * m + a] * w[t];
      w[a] /= chol[a * m + a];
    }
    for (std::size_t a = m; a-- > 0;) {
      for (std::size_t t = a + 1; t < m; ++t) w[a] -= chol[a * m + t] * w[t];
      w[a] /= chol[a * m + a];
    }
    for (std::size_t l = 0; l < h; ++l) net.w2[o * h + l] = w[l];
    net.b2[o] = w[h];
  }
  return FrozenDenoiser(std::move(net));
}

struct ComposedLoss {
  double total = 0.0;
  double composed_term = 0.0;  // ||Pi(f(x)) - y||^2, mean
  double direct_term = 0.0;    // ||f(x) - y||^2, mean
  Gradients grad;              // grad_composed + lambda * grad_direct
  Gradients grad_composed;     // both w.r.t. the base network only
  Gradients grad_direct;
};

/// Gaussian instantiation of the composed objective on a batch:
/// composed squared error through the frozen denoiser plus lambda times the
/// direct squared error. The gradient flows through the denoiser but its
/// parameter gradient is discarded.
inline ComposedLoss composed_loss(const ReluNet2& base,
                                  const FrozenDenoiser& pi, const Batch& batch,
                                  double lambda) {
  if (!pi.intact())
    throw std::logic_error("composed_loss: denoiser was modified");
  ComposedLoss out;
  out.grad = Gradients::zeros_like(base);
  out.grad_composed = Gradients::zeros_like(base);
  out.grad_direct = Gradients::zeros_like(base);
  Gradients& g_comp = out.grad_composed;
  Gradients& g_dir = out.grad_direct;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const std::size_t k = base.out_dim;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Vec yb = base.eval(batch.x[s]);
    const Vec yd = pi.denoise(yb);
    Vec d_yd(k);
    for (std::size_t j = 0; j < k; ++j) {
      const double r = yd[j] - batch.y[s][j];
      out.composed_term += r * r * inv;
      d_yd[j] = 2.0 * r * inv;
    }
    Vec d_yb(k, 0.0);
    backprop_sample(pi.net(), yb, d_yd, nullptr, &d_yb);  // params discarded
    backprop_sample(base, batch.x[s], d_yb, &g_comp, nullptr);

    Vec d_dir(k);
    for (std::size_t j = 0; j < k; ++j) {
      const double r = yb[j] - batch.y[s][j];
      out.direct_term += r * r * inv;
      d_dir[j] = 2.0 * r * inv;
    }
    backprop_sample(base, batch.x[s], d_dir, &g_dir, nullptr);
  }
  out.total = out.composed_term + lambda * out.direct_term;
  out.grad.axpy(1.0, g_comp);
  out.grad.axpy(lambda, g_dir);
  return out;
}

// ---------------------------------------------------------------------------
// Staircase experiment

struct ArmMetrics {
  std::string arm;
  std::uint64_t seed = 0;
  double mse_train = 0.0;
  double mse_test = 0.0;
  double mse_ood = 0.0;
  double em_ood = 0.0;       // exact match through projection
  double complexity = 0.0;   // C(theta) of the base predictor
};

struct StaircaseExperimentReport {
  std::vector<ArmMetrics> rows;  // 4 arms x n_seeds, seed-major
  bool affine_extendable = false;

  std::vector<ArmMetrics> arm_rows(const std::string& arm) const {
    std::vector<ArmMetrics> out;
    for (const ArmMetrics& r : rows)
      if (r.arm == arm) out.push_back(r);
    return out;
  }
};

inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

namespace detail {

// Affine staircase pattern: evenly spaced equal-length intervals whose
// values advance by a constant step. Such staircases extend beyond the
// spec's range, which defines ground truth for extrapolation.
struct AffinePattern {
  bool ok = false;
  double center0 = 0.0, period = 0.0, half_len = 0.0;
  Vec value0, step;

  Vec value_at(std::ptrdiff_t i) const {
    Vec v = value0;
    for (std::size_t j = 0; j < v.size(); ++j)
      v[j] += static_cast<double>(i) * step[j];
    return v;
  }
  double center_at(std::ptrdiff_t i) const {
    return center0 + static_cast<double>(i) * period;
  }
};

inline AffinePattern detect_affine(const StaircaseSpec& spec) {
  AffinePattern p;
  if (spec.size() < 2) return p;
  p.center0 = 0.5 * (spec.interval(0).lo + spec.interval(0).hi);
  p.half_len = 0.5 * spec.interval(0).length();
  const double c1 = 0.5 * (spec.interval(1).lo + spec.interval(1).hi);
  p.period = c1 - p.center0;
  p.value0 = spec.value(0);
  p.step = spec.value(1);
  for (std::size_t j = 0; j < p.step.size(); ++j) p.step[j] -= p.value0[j];
  const double tol = 1e-9;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double c = 0.5 * (spec.interval(i).lo + spec.interval(i).hi);
    if (std::abs(c - p.center_at(static_cast<std::ptrdiff_t>(i))) > tol)
      return p;
    if (std::abs(0.5 * spec.interval(i).length() - p.half_len) > tol) return p;
    const Vec want = p.value_at(static_cast<std::ptrdiff_t>(i));
    for (std::size_t j = 0; j < want.size(); ++j)
      if (std::abs(spec.value(i)[j] - want[j]) > tol) return p;
  }
  p.ok = true;
  return p;
}

struct LabeledPoint {
  double x;
  Vec y;
};

inline double mse(const std::vector<Vec>& pred,
                  const std::vector<LabeledPoint>& data) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    s += squared_distance(pred[i], data[i].y);
  return s / static_cast<double>(data.size());
}

inline double exact_match(const std::vector<Vec>& pred,
                          const std::vector<LabeledPoint>& data,
                          const ValidSet& v) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (project(pred[i], v).point == data[i].y) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace detail

/// Runs the four-arm staircase comparison: standard fine-tuning, standard
/// with a hard test-time projection, composed training through the frozen
/// learned denoiser, and the composed base with a hard final projection.
/// Labeled data comes from two of every three intervals; the held-out
/// intervals plus (when the staircase pattern extends) one domain-width of
/// extrapolation on each side form the OOD set.
inline StaircaseExperimentReport run_staircase_experiment(
    const StaircaseSpec& spec, const ComposedConfig& cfg) {
  using detail::LabeledPoint;
  StaircaseExperimentReport report;
  const detail::AffinePattern pat = detail::detect_affine(spec);
  report.affine_extendable = pat.ok;
  const std::size_t k = spec.dim();

  // Valid outputs: the spec's values, extended along the affine pattern to
  // cover the extrapolation range (with one spare cell of margin).
  std::ptrdiff_t lo_idx = 0, hi_idx = static_cast<std::ptrdiff_t>(spec.size()) - 1;
  std::ptrdiff_t ext = 0;
  if (pat.ok && cfg.ood_extension > 0.0) {
    const double width = spec.domain_hi() - spec.domain_lo();
    ext = static_cast<std::ptrdiff_t>(
              std::ceil(cfg.ood_extension * width / pat.period)) +
          1;
  }
  std::vector<Vec> vpts;
  for (std::ptrdiff_t i = lo_idx - ext; i <= hi_idx + ext; ++i)
    vpts.push_back(pat.ok ? pat.value_at(i) : spec.value(static_cast<std::size_t>(
                                                  std::clamp<std::ptrdiff_t>(
                                                      i, 0, hi_idx))));
  if (!pat.ok) {
    vpts.clear();
    for (const Vec& v : spec.values())
      if (std::find(vpts.begin(), vpts.end(), v) == vpts.end())
        vpts.push_back(v);
  }
  const ValidSet valid(vpts);

  // Split: every third interval is held out for OOD evaluation.
  std::vector<std::size_t> train_ivs, held_out;
  for (std::size_t i = 0; i < spec.size(); ++i)
    (i % 3 == 2 ? held_out : train_ivs).push_back(i);
  if (held_out.empty()) held_out.push_back(spec.size() - 1);

  auto sample_from = [&](Rng& rng, const std::vector<std::size_t>& ivs,
                         std::size_t n) {
    std::vector<LabeledPoint> pts;
    pts.reserve(n);
    double total_len = 0.0;
    for (std::size_t i : ivs) total_len += spec.interval(i).length();
    for (std::size_t s = 0; s < n; ++s) {
      double u = rng.uniform() * total_len;
      std::size_t pick = ivs.back();
      for (std::size_t i : ivs) {
        if (u < spec.interval(i).length()) {
          pick = i;
          break;
        }
        u -= spec.interval(i).length();
      }
      const double x = rng.uniform(spec.interval(pick).lo,
                                   spec.interval(pick).hi);
      pts.push_back({x, spec.value(pick)});
    }
    return pts;
  };

  // Extrapolation points live in the pattern's virtual intervals beyond the
  // spec's domain, so their ground truth is defined.
  auto sample_extrapolation = [&](Rng& rng, std::size_t n) {
    std::vector<LabeledPoint> pts;
    if (!pat.ok || ext == 0) return pts;
    pts.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
      const bool right = rng.bernoulli(0.5);
      const std::ptrdiff_t off =
          1 + static_cast<std::ptrdiff_t>(rng.uniform_int(0, ext - 2 >= 0 ? ext - 2 : 0));
      const std::ptrdiff_t i = right ? hi_idx + off : lo_idx - off;
      const double c = pat.center_at(i);
      pts.push_back({rng.uniform(c - pat.half_len, c + pat.half_len),
                     pat.value_at(i)});
    }
    return pts;
  };

  // One shared pre-trained denoiser, as in the protocol: unlabeled valid
  // outputs only.
  std::vector<Vec> unlabeled;
  {
    Rng rng(Rng::derive(cfg.seed, 7));
    unlabeled.reserve(cfg.n_unlabeled);
    for (std::size_t s = 0; s < cfg.n_unlabeled; ++s)
      unlabeled.push_back(
          valid.point(static_cast<std::size_t>(rng.uniform_int(
              0, static_cast<std::int64_t>(valid.size()) - 1))));
  }
  const FrozenDenoiser denoiser = pretrain_denoiser(unlabeled, cfg.sigma, cfg);

  auto to_batch = [](const std::vector<LabeledPoint>& pts) {
    Batch b;
    for (const LabeledPoint& p : pts) {
      b.x.push_back({p.x});
      b.y.push_back(p.y);
    }
    return b;
  };

  for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
    const std::uint64_t seed = Rng::derive(cfg.seed, 1000 + s);
    Rng rng(seed);
    const auto train_pts = sample_from(rng, train_ivs, cfg.n_train);
    const auto val_pts = sample_from(rng, train_ivs, cfg.n_val);
    const auto test_pts = sample_from(rng, train_ivs, cfg.n_test);
    auto ood_pts = sample_from(rng, held_out, cfg.n_ood / 2);
    const auto extra = sample_extrapolation(rng, cfg.n_ood - ood_pts.size());
    ood_pts.insert(ood_pts.end(), extra.begin(), extra.end());

    const Batch train_b = to_batch(train_pts);
    const Batch val_b = to_batch(val_pts);

    // Trains one arm once per weight-decay candidate with early stopping and
    // keeps the net with the best validation loss. `composed` switches both
    // the objective and the validation criterion to the composed loss.
    const std::uint64_t pi_hash_before = denoiser.hash();
    auto train_arm = [&](bool composed, std::uint64_t arm_salt) {
      struct Candidate {
        ReluNet2 net;
        double val;
      };
      std::vector<Candidate> cands;
      for (std::size_t w = 0; w < cfg.weight_decay_grid.size(); ++w) {
        TrainConfig tc;
        tc.lr = cfg.lr;
        tc.momentum = cfg.momentum;
        tc.weight_decay = cfg.weight_decay_grid[w];
        ReluNet2 net = ReluNet2::random(
            1, k, cfg.base_hidden, Rng::derive(seed, arm_salt * 131 + w));
        GdState st(net);
        ReluNet2 best = net;
        double best_val = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < cfg.base_epochs; ++e) {
          if (composed) {
            ComposedLoss cl = composed_loss(net, denoiser, train_b, cfg.lambda);
            apply_update(net, cl.grad, tc, st);
          } else {
            auto [loss, g] = backprop(net, train_b);
            (void)loss;
            apply_update(net, g, tc, st);
          }
          if (e % cfg.eval_every == 0 || e + 1 == cfg.base_epochs) {
            const double vl =
                composed ? composed_loss(net, denoiser, val_b, cfg.lambda).total
                         : backprop(net, val_b).first;
            if (vl <= best_val) {
              best_val = vl;
              best = net;
            }
          }
        }
        cands.push_back({std::move(best), best_val});
      }
      // Pick the candidate with the best validation loss; among candidates
      // within tolerance of it, prefer the lowest-complexity net.
      double vmin = std::numeric_limits<double>::infinity();
      for (const Candidate& c : cands) vmin = std::min(vmin, c.val);
      const double cutoff = vmin + std::max(0.005, 0.10 * vmin);
      const Candidate* pick = nullptr;
      for (const Candidate& c : cands) {
        if (c.val > cutoff) continue;
        if (!pick || complexity(c.net) < complexity(pick->net)) pick = &c;
      }
      return pick->net;
    };

    const ReluNet2 std_net = train_arm(false, 1);
    const ReluNet2 comp_net = train_arm(true, 2);
    if (denoiser.hash() != pi_hash_before || !denoiser.intact())
      throw std::logic_error("staircase experiment: denoiser changed");

    auto predict = [&](const ReluNet2& net,
                       const std::vector<LabeledPoint>& pts,
                       int mode /*0 raw, 1 hard, 2 learned pi, 3 learned->raw hard*/) {
      std::vector<Vec> out;
      out.reserve(pts.size());
      for (const LabeledPoint& p : pts) {
        Vec y = net.eval1(p.x);
        if (mode == 2) y = denoiser.denoise(y);
        if (mode == 1 || mode == 3) y = project(y, valid).point;
        out.push_back(std::move(y));
      }
      return out;
    };

    struct ArmSpec {
      const char* name;
      const ReluNet2* net;
      int mode;
    };
    const ArmSpec arms[] = {
        {"standard", &std_net, 0},
        {"standard_testtime_denoiser", &std_net, 1},
        {"composed", &comp_net, 2},
        {"composed_hard_projection", &comp_net, 3},
    };
    for (const ArmSpec& a : arms) {
      ArmMetrics m;
      m.arm = a.name;
      m.seed = seed;
      m.mse_train = detail::mse(predict(*a.net, train_pts, a.mode), train_pts);
      m.mse_test = detail::mse(predict(*a.net, test_pts, a.mode), test_pts);
      m.mse_ood = detail::mse(predict(*a.net, ood_pts, a.mode), ood_pts);
      m.em_ood =
          detail::exact_match(predict(*a.net, ood_pts, a.mode), ood_pts, valid);
      m.complexity = complexity(*a.net);
      report.rows.push_back(std::move(m));
    }
  }
  return report;
}

inline std::string staircase_csv_header() {
  return "arm,seed,mse_train,mse_test,mse_ood,em_ood,complexity";
}

inline std::string staircase_csv_row(const ArmMetrics& m) {
  std::ostringstream os;
  os << m.arm << ',' << m.seed << ',' << fmt_double(m.mse_train) << ','
     << fmt_double(m.mse_test) << ',' << fmt_double(m.mse_ood) << ','
     << fmt_double(m.em_ood) << ',' << fmt_double(m.complexity);
  return os.str();
}

}  // namespace complab
