#pragma once

// Gated FiLM fusion of 2D and geometry features:
//
//   fused = g * ((1 + dgamma) * f3d + beta) + (1 - g) * f2d
//
// with g in (0, 1) broadcast over channels. Only the fusion itself lives here;
// the regressors producing dgamma, beta and g are not part of this library.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "lap/error.hpp"

namespace lap {

struct FeatureShape {
  int height = 1;
  int width = 1;
  int channels = 1;

  std::size_t count() const { return static_cast<std::size_t>(height) * width * channels; }
  bool operator==(const FeatureShape&) const = default;
};

/// Row-major H x W x C array.
struct FeatureGrid {
  FeatureShape shape;
  std::vector<double> values;

  FeatureGrid() = default;
  explicit FeatureGrid(FeatureShape s, double fill = 0.0) : shape(s), values(s.count(), fill) {}

  double& at(int h, int w, int c) { return values[index(h, w, c)]; }
  double at(int h, int w, int c) const { return values[index(h, w, c)]; }

  std::size_t index(int h, int w, int c) const {
    return (static_cast<std::size_t>(h) * shape.width + w) * shape.channels + c;
  }

  bool finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

struct ModulationParams {
  FeatureGrid delta_gamma; // H x W x C
  FeatureGrid beta;        // H x W x C
  FeatureGrid gate;        // H x W x 1, entries in (0, 1)
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Identity coefficients with a nearly closed gate (pre-activation -4), so the
/// fused output starts close to the 2D features.
inline ModulationParams initial_modulation(FeatureShape s, double gate_logit = -4.0) {
  ModulationParams p;
  p.delta_gamma = FeatureGrid(s, 0.0);
  p.beta = FeatureGrid(s, 0.0);
  p.gate = FeatureGrid({s.height, s.width, 1}, sigmoid(gate_logit));
  return p;
}

namespace detail {

inline void check_shapes(const FeatureGrid& f2d, const FeatureGrid& f3d, const ModulationParams& p) {
  const FeatureShape s = f2d.shape;
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ShapeMismatch, what); };
  if (f3d.shape != s) fail("f3d shape differs from f2d");
  if (p.delta_gamma.shape != s) fail("delta_gamma shape differs from f2d");
  if (p.beta.shape != s) fail("beta shape differs from f2d");
  if (p.gate.shape != FeatureShape{s.height, s.width, 1}) fail("gate must be H x W x 1");
  for (const FeatureGrid* g : {&f2d, &f3d, &p.delta_gamma, &p.beta, &p.gate})
    if (g->values.size() != g->shape.count()) fail("value count does not match shape");
}

} // namespace detail

inline FeatureGrid fuse(const FeatureGrid& f2d, const FeatureGrid& f3d, const ModulationParams& p) {
  detail::check_shapes(f2d, f3d, p);
  FeatureGrid out(f2d.shape);
  const int C = f2d.shape.channels;
  for (int h = 0; h < f2d.shape.height; ++h)
    for (int w = 0; w < f2d.shape.width; ++w) {
      const double g = p.gate.at(h, w, 0);
      for (int c = 0; c < C; ++c) {
        const double modulated = (1.0 + p.delta_gamma.at(h, w, c)) * f3d.at(h, w, c) + p.beta.at(h, w, c);
        out.at(h, w, c) = g * modulated + (1.0 - g) * f2d.at(h, w, c);
      }
    }
  return out;
}

/// Element-wise partial derivatives of the fused output. `d_gate` holds
/// d out[h,w,c] / d g[h,w]; the other grids are the diagonal Jacobians w.r.t.
/// the same-index input element.
struct FuseGradients {
  FeatureGrid d_f2d;
  FeatureGrid d_f3d;
  FeatureGrid d_delta_gamma;
  FeatureGrid d_beta;
  FeatureGrid d_gate;
};

inline FuseGradients fuse_gradients(const FeatureGrid& f2d, const FeatureGrid& f3d, const ModulationParams& p) {
  detail::check_shapes(f2d, f3d, p);
  const FeatureShape s = f2d.shape;
  FuseGradients d{FeatureGrid(s), FeatureGrid(s), FeatureGrid(s), FeatureGrid(s), FeatureGrid(s)};
  for (int h = 0; h < s.height; ++h)
    for (int w = 0; w < s.width; ++w) {
      const double g = p.gate.at(h, w, 0);
      for (int c = 0; c < s.channels; ++c) {
        const double x3 = f3d.at(h, w, c);
        const double dg = p.delta_gamma.at(h, w, c);
        d.d_f2d.at(h, w, c) = 1.0 - g;
        d.d_f3d.at(h, w, c) = g * (1.0 + dg);
        d.d_delta_gamma.at(h, w, c) = g * x3;
        d.d_beta.at(h, w, c) = g;
        d.d_gate.at(h, w, c) = (1.0 + dg) * x3 + p.beta.at(h, w, c) - f2d.at(h, w, c);
      }
    }
  return d;
}

/// Compares the analytic Jacobian of `fuse` with central finite differences
/// over every input element and returns the largest relative error.
inline double fuse_jacobian_check(FeatureShape shape, unsigned seed, double step = 1e-5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> logit(-3.0, 3.0);

  auto random_grid = [&](FeatureShape s) {
    FeatureGrid g(s);
    for (double& v : g.values) v = unit(rng);
    return g;
  };
  FeatureGrid f2d = random_grid(shape);
  FeatureGrid f3d = random_grid(shape);
  ModulationParams p;
  p.delta_gamma = random_grid(shape);
  p.beta = random_grid(shape);
  p.gate = FeatureGrid({shape.height, shape.width, 1});
  for (double& v : p.gate.values) v = sigmoid(logit(rng));

  const FuseGradients grad = fuse_gradients(f2d, f3d, p);
  const int C = shape.channels;
  double worst = 0.0;

  // Relative error with a floor so near-zero derivatives are judged absolutely.
  auto compare = [&](double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };

  // Perturbs one element of `target`, then checks every output element against
  // the analytic derivative (zero outside the affected location).
  auto sweep = [&](FeatureGrid& target, auto&& analytic_at) {
    for (std::size_t e = 0; e < target.values.size(); ++e) {
      const double saved = target.values[e];
      target.values[e] = saved + step;
      const FeatureGrid plus = fuse(f2d, f3d, p);
      target.values[e] = saved - step;
      const FeatureGrid minus = fuse(f2d, f3d, p);
      target.values[e] = saved;
      for (std::size_t o = 0; o < plus.values.size(); ++o) {
        const double numeric = (plus.values[o] - minus.values[o]) / (2.0 * step);
        compare(analytic_at(e, o), numeric);
      }
    }
  };

  auto diagonal = [](const FeatureGrid& d) {
    return [&d](std::size_t e, std::size_t o) { return e == o ? d.values[o] : 0.0; };
  };
  sweep(f2d, diagonal(grad.d_f2d));
  sweep(f3d, diagonal(grad.d_f3d));
  sweep(p.delta_gamma, diagonal(grad.d_delta_gamma));
  sweep(p.beta, diagonal(grad.d_beta));
  sweep(p.gate, [&](std::size_t e, std::size_t o) {
    return o / static_cast<std::size_t>(C) == e ? grad.d_gate.values[o] : 0.0;
  });
  return worst;
}

} // namespace lap
