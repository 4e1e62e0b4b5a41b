#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "complab/common.hpp"
#include "complab/spline.hpp"

namespace complab {

/// Two-layer ReLU network R^d -> R^k with a shared first layer and one
/// second-layer weight row per output. h = 0 degenerates to the constant b2.
struct ReluNet2 {
  std::size_t in_dim = 1, out_dim = 1, hidden = 0;
  std::vector<double> w1;  // hidden x in_dim, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // out_dim x hidden, row-major
  std::vector<double> b2;  // out_dim

  static ReluNet2 zeros(std::size_t in, std::size_t out, std::size_t h) {
    ReluNet2 n;
    n.in_dim = in;
    n.out_dim = out;
    n.hidden = h;
    n.w1.assign(h * in, 0.0);
    n.b1.assign(h, 0.0);
    n.w2.assign(out * h, 0.0);
    n.b2.assign(out, 0.0);
    return n;
  }

  static ReluNet2 random(std::size_t in, std::size_t out, std::size_t h,
                         std::uint64_t seed) {
    ReluNet2 n = zeros(in, out, h);
    if (h == 0) return n;
    Rng rng(seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(h));
    for (double& w : n.w1) w = rng.uniform(-s, s);
    for (double& w : n.b1) w = rng.uniform(-s, s);
    for (double& w : n.w2) w = rng.uniform(-s, s);
    for (double& w : n.b2) w = rng.uniform(-s, s);
    return n;
  }

  std::size_t param_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }

  std::vector<double> flatten() const {
    std::vector<double> p;
    p.reserve(param_count());
    p.insert(p.end(), w1.begin(), w1.end());
    p.insert(p.end(), b1.begin(), b1.end());
    p.insert(p.end(), w2.begin(), w2.end());
    p.insert(p.end(), b2.begin(), b2.end());
    return p;
  }

  void unflatten(const std::vector<double>& p) {
    std::size_t o = 0;
    for (double& w : w1) w = p[o++];
    for (double& w : b1) w = p[o++];
    for (double& w : w2) w = p[o++];
    for (double& w : b2) w = p[o++];
  }

  std::uint64_t param_hash() const { return hash_doubles(flatten()); }

  // Hidden activations for one input.
  Vec hidden_act(const Vec& x) const {
    Vec a(hidden);
    for (std::size_t l = 0; l < hidden; ++l) {
      double z = b1[l];
      for (std::size_t d = 0; d < in_dim; ++d) z += w1[l * in_dim + d] * x[d];
      a[l] = z > 0.0 ? z : 0.0;  // subgradient at 0 taken as 0
    }
    return a;
  }

  Vec eval(const Vec& x) const {
    const Vec a = hidden_act(x);
    Vec y(out_dim);
    for (std::size_t j = 0; j < out_dim; ++j) {
      double s = b2[j];
      for (std::size_t l = 0; l < hidden; ++l) s += w2[j * hidden + l] * a[l];
      y[j] = s;
    }
    return y;
  }

  Vec eval1(double x) const { return eval(Vec{x}); }
};

/// Weight-norm complexity C(theta): half the squared Frobenius norms of both
/// weight matrices; biases excluded.
inline double complexity(const ReluNet2& n) {
  return 0.5 * (squared_norm(n.w1) + squared_norm(n.w2));
}

struct Gradients {
  std::vector<double> w1, b1, w2, b2;

  static Gradients zeros_like(const ReluNet2& n) {
    Gradients g;
    g.w1.assign(n.w1.size(), 0.0);
    g.b1.assign(n.b1.size(), 0.0);
    g.w2.assign(n.w2.size(), 0.0);
    g.b2.assign(n.b2.size(), 0.0);
    return g;
  }

  void scale(double s) {
    for (double& v : w1) v *= s;
    for (double& v : b1) v *= s;
    for (double& v : w2) v *= s;
    for (double& v : b2) v *= s;
  }

  void axpy(double a, const Gradients& o) {
    for (std::size_t i = 0; i < w1.size(); ++i) w1[i] += a * o.w1[i];
    for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += a * o.b1[i];
    for (std::size_t i = 0; i < w2.size(); ++i) w2[i] += a * o.w2[i];
    for (std::size_t i = 0; i < b2.size(); ++i) b2[i] += a * o.b2[i];
  }

  std::vector<double> flatten() const {
    std::vector<double> p;
    p.reserve(w1.size() + b1.size() + w2.size() + b2.size());
    p.insert(p.end(), w1.begin(), w1.end());
    p.insert(p.end(), b1.begin(), b1.end());
    p.insert(p.end(), w2.begin(), w2.end());
    p.insert(p.end(), b2.begin(), b2.end());
    return p;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : flatten()) m = std::max(m, std::abs(v));
    return m;
  }
};

/// Accumulate parameter gradients for one sample given upstream dL/dy.
/// When dx is non-null, also accumulates dL/dx (used to chain a frozen
/// downstream network back into an upstream one).
inline void backprop_sample(const ReluNet2& n, const Vec& x, const Vec& dy,
                            Gradients* g, Vec* dx) {
  Vec pre(n.hidden);
  for (std::size_t l = 0; l < n.hidden; ++l) {
    double z = n.b1[l];
    for (std::size_t d = 0; d < n.in_dim; ++d)
      z += n.w1[l * n.in_dim + d] * x[d];
    pre[l] = z;
  }
  for (std::size_t j = 0; j < n.out_dim; ++j) {
    if (g) g->b2[j] += dy[j];
    for (std::size_t l = 0; l < n.hidden; ++l)
      if (g) g->w2[j * n.hidden + l] += dy[j] * (pre[l] > 0.0 ? pre[l] : 0.0);
  }
  for (std::size_t l = 0; l < n.hidden; ++l) {
    if (pre[l] <= 0.0) continue;  // ReLU gate (0 at the kink)
    double da = 0.0;
    for (std::size_t j = 0; j < n.out_dim; ++j)
      da += dy[j] * n.w2[j * n.hidden + l];
    if (g) g->b1[l] += da;
    for (std::size_t d = 0; d < n.in_dim; ++d) {
      if (g) g->w1[l * n.in_dim + d] += da * x[d];
      if (dx) (*dx)[d] += da * n.w1[l * n.in_dim + d];
    }
  }
}

struct Batch {
  std::vector<Vec> x, y;
  std::size_t size() const { return x.size(); }
};

/// Mean squared-error loss over a batch (summed over output coordinates)
/// and its exact parameter gradient.
inline std::pair<double, Gradients> backprop(const ReluNet2& n,
                                             const Batch& batch) {
  Gradients g = Gradients::zeros_like(n);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Vec pred = n.eval(batch.x[s]);
    Vec dy(n.out_dim);
    for (std::size_t j = 0; j < n.out_dim; ++j) {
      const double r = pred[j] - batch.y[s][j];
      loss += r * r * inv;
      dy[j] = 2.0 * r * inv;
    }
    backprop_sample(n, batch.x[s], dy, &g, nullptr);
  }
  return {loss, g};
}

struct TrainConfig {
  double lr = 0.01;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;  // pressure on C(theta); never touches biases
  double momentum = 0.0;
};

struct GdState {
  Gradients velocity;
  explicit GdState(const ReluNet2& n) : velocity(Gradients::zeros_like(n)) {}
};

inline void apply_update(ReluNet2& n, const Gradients& g,
                         const TrainConfig& cfg, GdState& st) {
  Gradients step = g;
  for (std::size_t i = 0; i < n.w1.size(); ++i)
    step.w1[i] += cfg.weight_decay * n.w1[i];
  for (std::size_t i = 0; i < n.w2.size(); ++i)
    step.w2[i] += cfg.weight_decay * n.w2[i];
  st.velocity.scale(cfg.momentum);
  st.velocity.axpy(-cfg.lr, step);
  for (std::size_t i = 0; i < n.w1.size(); ++i) n.w1[i] += st.velocity.w1[i];
  for (std::size_t i = 0; i < n.b1.size(); ++i) n.b1[i] += st.velocity.b1[i];
  for (std::size_t i = 0; i < n.w2.size(); ++i) n.w2[i] += st.velocity.w2[i];
  for (std::size_t i = 0; i < n.b2.size(); ++i) n.b2[i] += st.velocity.b2[i];
}

struct TrainResult {
  ReluNet2 net;
  std::vector<double> trace;  // loss per epoch, before each update
};

/// Full-batch gradient descent on squared error. Deterministic for a fixed
/// seed and config.
inline TrainResult train(ReluNet2 net, const Batch& data,
                         const TrainConfig& cfg) {
  TrainResult out{std::move(net), {}};
  out.trace.reserve(cfg.epochs);
  GdState st(out.net);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    auto [loss, g] = backprop(out.net, data);
    out.trace.push_back(loss);
    apply_update(out.net, g, cfg, st);
  }
  return out;
}

/// Compile a linear spline into an exact 2-layer ReLU realization on [a, b]:
/// one balanced hidden unit per slope change plus, when the slope entering
/// `a` is nonzero, one always-active unit carrying it (the class has no skip
/// connection, so an affine part costs |slope| on a bounded domain).
inline ReluNet2 compile_spline(const LinearSpline& f, double a, double b) {
  if (!(std::isfinite(a) && std::isfinite(b) && a < b))
    throw std::invalid_argument("compile_spline: bad domain");
  for (const auto& k : f.knots())
    if (k.x < a || k.x > b)
      throw std::invalid_argument("compile_spline: knot outside domain");

  const std::vector<double> seq = f.slope_sequence();
  struct Unit {
    double kink, slope;  // adds slope * (x - kink)_+
  };
  std::vector<Unit> units;
  if (seq.front() != 0.0) units.push_back({a, seq.front()});
  for (std::size_t j = 0; j < f.knots().size(); ++j) {
    const double d = seq[j + 1] - seq[j];
    if (d != 0.0) units.push_back({f.knots()[j].x, d});
  }

  ReluNet2 n = ReluNet2::zeros(1, 1, units.size());
  for (std::size_t l = 0; l < units.size(); ++l) {
    const double r = std::sqrt(std::abs(units[l].slope));
    n.w1[l] = r;
    n.b1[l] = -r * units[l].kink;
    n.w2[l] = units[l].slope > 0.0 ? r : -r;
  }
  n.b2[0] = f(a);
  return n;
}

/// Stack univariate networks R -> R into one R -> R^k network: first-layer
/// weights concatenate, each output row extends its own second layer with
/// zeros for the foreign hidden units.
inline ReluNet2 concat_univariate(const std::vector<ReluNet2>& nets) {
  std::size_t h = 0;
  for (const ReluNet2& n : nets) {
    if (n.in_dim != 1 || n.out_dim != 1)
      throw std::invalid_argument("concat_univariate: parts must be R->R");
    h += n.hidden;
  }
  ReluNet2 out = ReluNet2::zeros(1, nets.size(), h);
  std::size_t off = 0;
  for (std::size_t j = 0; j < nets.size(); ++j) {
    const ReluNet2& n = nets[j];
    for (std::size_t l = 0; l < n.hidden; ++l) {
      out.w1[off + l] = n.w1[l];
      out.b1[off + l] = n.b1[l];
      out.w2[j * h + off + l] = n.w2[l];
    }
    out.b2[j] = n.b2[0];
    off += n.hidden;
  }
  return out;
}

}  // namespace complab
