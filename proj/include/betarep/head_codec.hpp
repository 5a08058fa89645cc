#pragma once

// Regression-target codec for the beta head and the mask math of the beta
// mask: anchor-relative deltas, mask rendering, and the mask KL loss.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "betarep/beta_core.hpp"
#include "betarep/error.hpp"
#include "betarep/geometry.hpp"

namespace betarep {

/// Anchor box by center and size.
struct Anchor {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;
};

/// Regression targets [l, t, r, b, μx, μy, σx, σy] in pixels.
struct BetaTargets {
  BBox boundary;
  double mu_x = 0.0;
  double mu_y = 0.0;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
};

/// Eight normalized deltas: boundary (dcx, dcy, dlogw, dlogh) then shape
/// (tμx, tμy, tlogσx, tlogσy).
struct DeltaVec {
  std::array<double, 8> v{};

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

inline void require_valid(const Anchor& a) {
  if (!(a.w > 0.0 && a.h > 0.0) || !std::isfinite(a.x) || !std::isfinite(a.y)) {
    throw InvalidTarget("anchor needs finite center and positive size");
  }
}

inline DeltaVec encode_targets(const BetaTargets& gt, const Anchor& a) {
  require_valid(a);
  if (!gt.boundary.valid()) throw InvalidTarget("target boundary has non-positive size");
  if (!(gt.sigma_x > 0.0 && gt.sigma_y > 0.0)) throw InvalidTarget("target sigma must be positive");
  DeltaVec d;
  d[0] = (gt.boundary.cx() - a.x) / a.w;
  d[1] = (gt.boundary.cy() - a.y) / a.h;
  d[2] = std::log(gt.boundary.width() / a.w);
  d[3] = std::log(gt.boundary.height() / a.h);
  d[4] = (gt.mu_x - a.x) / a.w;
  d[5] = (gt.mu_y - a.y) / a.h;
  d[6] = std::log(gt.sigma_x / a.w);
  d[7] = std::log(gt.sigma_y / a.h);
  return d;
}

inline BetaTargets decode_targets(const DeltaVec& d, const Anchor& a) {
  require_valid(a);
  for (double x : d.v) {
    if (!std::isfinite(x)) throw InvalidTarget("non-finite regression delta");
  }
  const double cx = a.x + d[0] * a.w;
  const double cy = a.y + d[1] * a.h;
  const double w = a.w * std::exp(d[2]);
  const double h = a.h * std::exp(d[3]);
  BetaTargets gt;
  gt.boundary = {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  if (!gt.boundary.valid()) throw InvalidGeometry("decoded boundary is degenerate");
  gt.mu_x = a.x + d[4] * a.w;
  gt.mu_y = a.y + d[5] * a.h;
  gt.sigma_x = a.w * std::exp(d[6]);
  gt.sigma_y = a.h * std::exp(d[7]);
  return gt;
}

/// Pixel-space targets carried by a Beta Representation.
inline BetaTargets targets_from_beta(const BetaPedestrian& bp, const WeightConfig& cfg) {
  const Moments1D mx = beta_to_moments(bp.x, bp.boundary.l, bp.boundary.r, cfg);
  const Moments1D my = beta_to_moments(bp.y, bp.boundary.t, bp.boundary.b, cfg);
  return {bp.boundary, mx.mu, my.mu, mx.sigma, my.sigma};
}

/// Shape parameters from predicted targets, through the same moment fit as
/// the annotation transform.
inline BetaPedestrian beta_from_targets(const BetaTargets& t, const WeightConfig& cfg,
                                        ClampDiagnostics* diagnostics = nullptr) {
  require_valid(t.boundary, "target boundary");
  BetaPedestrian bp;
  bp.boundary = t.boundary;
  bp.x = moments_to_beta({t.mu_x, t.sigma_x}, t.boundary.l, t.boundary.r, cfg, diagnostics);
  bp.y = moments_to_beta({t.mu_y, t.sigma_y}, t.boundary.t, t.boundary.b, cfg, diagnostics);
  return bp;
}

/// Smooth L1 (Huber with transition 1.0 by default) summed over the eight deltas.
inline double smooth_l1(const DeltaVec& pred, const DeltaVec& target, double transition = 1.0) {
  double acc = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double diff = std::abs(pred[i] - target[i]);
    acc += diff < transition ? 0.5 * diff * diff / transition : diff - 0.5 * transition;
  }
  return acc;
}

/// h × w grid of nonnegative mass summing to one, row-major.
struct MaskGrid {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * w + col]; }
  double sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }
};

/// Samples Be(x̄)·Be(ȳ) at the cell centers of an h × w grid spanning the
/// boundary and normalizes to unit mass.
inline MaskGrid render_mask(const BetaPedestrian& bp, std::size_t h, std::size_t w) {
  require_valid(bp);
  if (h == 0 || w == 0) throw ShapeError("mask dimensions must be at least 1x1");
  std::vector<double> col_density(w), row_density(h);
  for (std::size_t c = 0; c < w; ++c) {
    col_density[c] = beta_pdf_1d((static_cast<double>(c) + 0.5) / static_cast<double>(w), bp.x);
  }
  for (std::size_t r = 0; r < h; ++r) {
    row_density[r] = beta_pdf_1d((static_cast<double>(r) + 0.5) / static_cast<double>(h), bp.y);
  }
  MaskGrid m{h, w, std::vector<double>(h * w)};
  double total = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double v = row_density[r] * col_density[c];
      m.values[r * w + c] = v;
      total += v;
    }
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw DomainError("mask has no finite mass");
  for (double& v : m.values) v /= total;
  return m;
}

/// Σ truth · (log truth − log predicted), both floored at epsilon.
inline double mask_kl_loss(const MaskGrid& predicted, const MaskGrid& truth,
                           double epsilon_floor = 1e-12) {
  if (predicted.h != truth.h || predicted.w != truth.w ||
      predicted.values.size() != truth.values.size()) {
    throw ShapeError("mask dimensions differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.values.size(); ++i) {
    const double t = std::max(truth.values[i], epsilon_floor);
    const double p = std::max(predicted.values[i], epsilon_floor);
    acc += t * (std::log(t) - std::log(p));
  }
  return std::max(0.0, acc);
}

}  // namespace betarep
