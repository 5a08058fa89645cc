#pragma once

// Beta Representation of a pedestrian: a full-body boundary plus one beta
// distribution per axis whose shape encodes where the visible pixels are.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "betarep/error.hpp"
#include "betarep/geometry.hpp"
#include "betarep/special.hpp"

namespace betarep {

enum class Axis { x, y };

/// Full-body box plus visible box. The visible box is clipped into the full
/// box on construction, so `full().contains(visible())` always holds.
class PairedBoxes {
 public:
  static PairedBoxes make(const BBox& full, const BBox& visible) {
    require_valid(full, "full-body box");
    const BBox clipped = intersect(full, visible);
    if (!clipped.valid()) {
      throw InvalidGeometry("visible box " + to_string(visible) +
                            " has no positive-area overlap with full-body box " + to_string(full));
    }
    return PairedBoxes(full, clipped);
  }

  const BBox& full() const noexcept { return full_; }
  const BBox& visible() const noexcept { return visible_; }

  friend bool operator==(const PairedBoxes&, const PairedBoxes&) = default;

 private:
  PairedBoxes(const BBox& full, const BBox& visible) : full_(full), visible_(visible) {}

  BBox full_;
  BBox visible_;
};

/// Pixel weights and normalization constants of the transform.
struct WeightConfig {
  double w_visible = 1.0;
  double w_full = 0.04;
  double rho = std::sqrt(12.0);
  double lambda = std::sqrt(12.0) / 4.0;

  void validate() const {
    if (!(w_visible > w_full && w_full > 0.0)) {
      throw DomainError("weights must satisfy w_visible > w_full > 0");
    }
    if (!(rho > 0.0) || !(lambda > 0.0) || !std::isfinite(rho) || !std::isfinite(lambda)) {
      throw DomainError("rho and lambda must be positive and finite");
    }
  }
};

/// Weighted mean and standard deviation along one axis, in pixels.
struct Moments1D {
  double mu = 0.0;
  double sigma = 0.0;
};

struct BetaParams1D {
  double alpha = 1.0;
  double beta = 1.0;

  double nu() const noexcept { return alpha + beta; }
  double mean() const noexcept { return alpha / (alpha + beta); }
  double variance() const noexcept {
    const double n = alpha + beta;
    return alpha * beta / (n * n * (n + 1.0));
  }
  bool valid() const noexcept {
    return std::isfinite(alpha) && std::isfinite(beta) && alpha > 0.0 && beta > 0.0;
  }

  friend bool operator==(const BetaParams1D&, const BetaParams1D&) = default;
};

/// The eight-parameter representation [l, t, r, b, αx, βx, αy, βy].
struct BetaPedestrian {
  BBox boundary;
  BetaParams1D x;
  BetaParams1D y;

  bool valid() const noexcept { return boundary.valid() && x.valid() && y.valid(); }

  friend bool operator==(const BetaPedestrian&, const BetaPedestrian&) = default;
};

inline void require_valid(const BetaPedestrian& bp) {
  require_valid(bp.boundary, "beta boundary");
  if (!bp.x.valid() || !bp.y.valid()) throw DomainError("beta shape parameters must be positive");
}

/// Counts shape fits and how many of them had α or β raised to the floor.
/// Safe to share between threads.
class ClampDiagnostics {
 public:
  void record(bool clamped) noexcept {
    fits_.fetch_add(1, std::memory_order_relaxed);
    if (clamped) clamped_.fetch_add(1, std::memory_order_relaxed);
  }
  std::uint64_t fits() const noexcept { return fits_.load(std::memory_order_relaxed); }
  std::uint64_t clamped() const noexcept { return clamped_.load(std::memory_order_relaxed); }
  double rate() const noexcept {
    const auto n = fits();
    return n ? static_cast<double>(clamped()) / static_cast<double>(n) : 0.0;
  }

 private:
  std::atomic<std::uint64_t> fits_{0};
  std::atomic<std::uint64_t> clamped_{0};
};

/// Lower bound applied to α and β when the moment fit lands at or below 1.
inline constexpr double kShapeFloor = 1.0 + 1e-6;

/// Moments of the piecewise-constant weight density on [lo, hi] that equals
/// w_visible on [vis_lo, vis_hi] and w_full elsewhere. The density is a
/// mixture of two uniforms (w_full on the whole interval plus the excess
/// w_visible − w_full on the visible part), so both moments are closed form.
inline Moments1D weighted_moments_1d(double lo, double hi, double vis_lo, double vis_hi,
                                     const WeightConfig& cfg) {
  if (!(hi > lo) || !(vis_hi > vis_lo) || vis_lo < lo || vis_hi > hi) {
    throw InvalidGeometry("weighted moments need lo <= vis_lo < vis_hi <= hi with hi > lo");
  }
  const double w_all = cfg.w_full * (hi - lo);
  const double w_vis = (cfg.w_visible - cfg.w_full) * (vis_hi - vis_lo);
  const double total = w_all + w_vis;

  const double m_all = 0.5 * (lo + hi);
  const double m_vis = 0.5 * (vis_lo + vis_hi);
  const double v_all = (hi - lo) * (hi - lo) / 12.0;
  const double v_vis = (vis_hi - vis_lo) * (vis_hi - vis_lo) / 12.0;

  // Mean offset relative to the full-box center keeps the variance free of cancellation.
  const double shift = w_vis * (m_vis - m_all) / total;
  const double mu = m_all + shift;
  const double d_all = m_all - mu;
  const double d_vis = m_vis - mu;
  const double var = (w_all * (v_all + d_all * d_all) + w_vis * (v_vis + d_vis * d_vis)) / total;
  return {mu, std::sqrt(var)};
}

inline Moments1D weighted_moments(const PairedBoxes& paired, const WeightConfig& cfg, Axis axis) {
  cfg.validate();
  const BBox& f = paired.full();
  const BBox& v = paired.visible();
  return axis == Axis::x ? weighted_moments_1d(f.l, f.r, v.l, v.r, cfg)
                         : weighted_moments_1d(f.t, f.b, v.t, v.b, cfg);
}

/// Result of a shape fit before clamping, exposed for diagnostics and tests.
struct BetaFit {
  BetaParams1D params;
  double mu_bar = 0.0;
  double sigma_bar = 0.0;
  bool clamped = false;
};

/// Normalizes pixel moments to [lo, hi] (σ scaled by λ) and solves the beta
/// moment equations ν = μ̄(1 − μ̄)/σ̄² − 1, α = μ̄ν, β = (1 − μ̄)ν.
inline BetaFit fit_beta(const Moments1D& m, double lo, double hi, const WeightConfig& cfg) {
  if (!(hi > lo)) throw InvalidGeometry("moments_to_beta needs lo < hi");
  if (!(m.sigma > 0.0) || !std::isfinite(m.sigma)) {
    throw InfeasibleMoments("standard deviation must be positive");
  }
  const double span = hi - lo;
  const double mu_bar = (m.mu - lo) / span;
  const double sigma_bar = cfg.lambda * m.sigma / span;
  if (!(mu_bar > 0.0 && mu_bar < 1.0)) {
    throw InfeasibleMoments("normalized mean " + std::to_string(mu_bar) + " outside (0, 1)");
  }
  const double nu = mu_bar * (1.0 - mu_bar) / (sigma_bar * sigma_bar) - 1.0;
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw InfeasibleMoments("normalized variance too large for a beta distribution (nu = " +
                            std::to_string(nu) + ")");
  }
  BetaFit fit;
  fit.mu_bar = mu_bar;
  fit.sigma_bar = sigma_bar;
  fit.params = {mu_bar * nu, (1.0 - mu_bar) * nu};
  if (fit.params.alpha <= 1.0) {
    fit.params.alpha = kShapeFloor;
    fit.clamped = true;
  }
  if (fit.params.beta <= 1.0) {
    fit.params.beta = kShapeFloor;
    fit.clamped = true;
  }
  return fit;
}

inline BetaParams1D moments_to_beta(const Moments1D& m, double lo, double hi,
                                    const WeightConfig& cfg,
                                    ClampDiagnostics* diagnostics = nullptr) {
  const BetaFit fit = fit_beta(m, lo, hi, cfg);
  if (diagnostics) diagnostics->record(fit.clamped);
  return fit.params;
}

inline BetaPedestrian boxes_to_beta(const PairedBoxes& paired, const WeightConfig& cfg,
                                    ClampDiagnostics* diagnostics = nullptr) {
  const BBox& f = paired.full();
  BetaPedestrian bp;
  bp.boundary = f;
  bp.x = moments_to_beta(weighted_moments(paired, cfg, Axis::x), f.l, f.r, cfg, diagnostics);
  bp.y = moments_to_beta(weighted_moments(paired, cfg, Axis::y), f.t, f.b, cfg, diagnostics);
  return bp;
}

/// Pixel-space mean and standard deviation encoded by one axis of a pedestrian.
inline Moments1D beta_to_moments(const BetaParams1D& p, double lo, double hi,
                                 const WeightConfig& cfg) {
  const double span = hi - lo;
  return {lo + p.mean() * span, std::sqrt(p.variance()) * span / cfg.lambda};
}

/// Approximate visible box: width ρσx and height ρσy centred on the
/// de-normalized means, clipped to the boundary. Not an exact inverse of
/// boxes_to_beta since w_full > 0 pulls the mean toward the full-box center.
inline BBox beta_to_visible_box(const BetaPedestrian& bp, const WeightConfig& cfg) {
  require_valid(bp);
  const BBox& f = bp.boundary;
  const Moments1D mx = beta_to_moments(bp.x, f.l, f.r, cfg);
  const Moments1D my = beta_to_moments(bp.y, f.t, f.b, cfg);
  const double half_w = 0.5 * cfg.rho * mx.sigma;
  const double half_h = 0.5 * cfg.rho * my.sigma;
  return intersect(f, BBox{mx.mu - half_w, my.mu - half_h, mx.mu + half_w, my.mu + half_h});
}

/// Be(x; α, β) on [0, 1]. Endpoints take the limiting value.
inline double beta_pdf_1d(double x, const BetaParams1D& p) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("beta density argument outside [0, 1]");
  const double lb = special::log_beta(p.alpha, p.beta);
  auto edge = [lb](double exponent_at_edge) {
    if (exponent_at_edge > 0.0) return 0.0;
    if (exponent_at_edge < 0.0) return std::numeric_limits<double>::infinity();
    return std::exp(-lb);
  };
  if (x == 0.0) return edge(p.alpha - 1.0);
  if (x == 1.0) return edge(p.beta - 1.0);
  return std::exp((p.alpha - 1.0) * std::log(x) + (p.beta - 1.0) * std::log1p(-x) - lb);
}

/// Density of the 2D beta distribution over the image plane. The factor
/// 1/((r − l)(b − t)) makes the integral over the plane equal to one.
inline double beta_pdf_2d(double x, double y, const BetaPedestrian& bp) {
  const BBox& f = bp.boundary;
  if (x < f.l || x > f.r || y < f.t || y > f.b) return 0.0;
  const double xn = std::clamp((x - f.l) / f.width(), 0.0, 1.0);
  const double yn = std::clamp((y - f.t) / f.height(), 0.0, 1.0);
  return beta_pdf_1d(xn, bp.x) * beta_pdf_1d(yn, bp.y) / f.area();
}

}  // namespace betarep
