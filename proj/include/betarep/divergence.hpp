#pragma once

// Distances between pedestrians: KL divergence between discretized 2D beta
// distributions, its symmetrized form, the closed-form 1D KL, and IoU.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "betarep/beta_core.hpp"
#include "betarep/error.hpp"
#include "betarep/geometry.hpp"
#include "betarep/special.hpp"

namespace betarep {

struct GridSpec {
  std::size_t resolution = 128;  // cells per axis
  double epsilon_floor = 1e-12;

  void validate() const {
    if (resolution < 8) throw DomainError("grid resolution must be at least 8");
    if (!(epsilon_floor > 0.0 && epsilon_floor < 1e-6)) {
      throw DomainError("epsilon floor must lie in (0, 1e-6)");
    }
  }
};

/// Normalized probability mass on a pixel-aligned grid, row-major (rows run along y).
struct PMFGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_w = 1.0;
  double cell_h = 1.0;
  std::size_t cols = 0;
  std::size_t rows = 0;
  double epsilon_floor = 1e-12;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * cols + col]; }
  double sum() const;

  bool same_layout(const PMFGrid& o) const noexcept {
    return origin_x == o.origin_x && origin_y == o.origin_y && cell_w == o.cell_w &&
           cell_h == o.cell_h && cols == o.cols && rows == o.rows;
  }
};

namespace detail {

/// Neumaier-compensated sum; plain accumulation over 128² cells drifts past 1e-12.
inline double compensated_sum(const std::vector<double>& v) noexcept {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

struct AxisMass {
  std::vector<double> log;   // -inf where the mass is zero
  std::vector<double> mass;  // sums to one
};

/// Normalized per-cell mass of one beta axis sampled at cell centers, with
/// its logarithm. Cells outside [lo, hi] get zero mass. A distribution narrower than a
/// cell that misses every center puts all of its mass in the cell holding its
/// midpoint.
inline AxisMass axis_mass(double lo, double hi, const BetaParams1D& p, double origin,
                                         double cell, std::size_t n) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> logm(n, kNegInf);
  const double span = hi - lo;
  double peak = kNegInf;
  // Unnormalized log density; the beta function cancels in the normalization.
  for (std::size_t i = 0; i < n; ++i) {
    const double c = origin + (static_cast<double>(i) + 0.5) * cell;
    if (c < lo || c > hi) continue;
    const double xn = (c - lo) / span;
    const double left = xn <= 0.0 ? (p.alpha == 1.0 ? 0.0 : (p.alpha > 1.0 ? kNegInf : -kNegInf))
                                  : (p.alpha - 1.0) * std::log(xn);
    const double right = xn >= 1.0 ? (p.beta == 1.0 ? 0.0 : (p.beta > 1.0 ? kNegInf : -kNegInf))
                                   : (p.beta - 1.0) * std::log1p(-xn);
    const double v = left + right;
    if (std::isnan(v) || v == -kNegInf) {
      throw DomainError("beta density is unbounded at a sampled cell center");
    }
    logm[i] = v;
    peak = std::max(peak, v);
  }
  if (peak == kNegInf) {
    const double mid = 0.5 * (lo + hi);
    auto idx = static_cast<std::ptrdiff_t>(std::floor((mid - origin) / cell));
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(n) - 1);
    logm[static_cast<std::size_t>(idx)] = 0.0;
    std::vector<double> mass(n, 0.0);
    mass[static_cast<std::size_t>(idx)] = 1.0;
    return {std::move(logm), std::move(mass)};
  }
  std::vector<double> mass(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mass[i] = std::exp(logm[i] - peak);
    total += mass[i];
  }
  const double log_norm = peak + std::log(total);
  for (std::size_t i = 0; i < n; ++i) {
    mass[i] /= total;
    logm[i] -= log_norm;
  }
  return {std::move(logm), std::move(mass)};
}

/// Σ_{row, col} max(ay[row] * ax[col], eps): normalizer after flooring the outer product.
inline double floored_outer_sum(const std::vector<double>& ax, const std::vector<double>& ay,
                                double eps) {
  std::vector<double> sorted(ax);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> suffix(sorted.size() + 1, 0.0);
  for (std::size_t k = sorted.size(); k-- > 0;) suffix[k] = suffix[k + 1] + sorted[k];
  double total = 0.0;
  for (double a : ay) {
    if (a <= 0.0) {
      total += static_cast<double>(sorted.size()) * eps;
      continue;
    }
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), eps / a);
    const auto k = static_cast<std::size_t>(first - sorted.begin());
    total += static_cast<double>(k) * eps + a * suffix[k];
  }
  return total;
}

struct AxisPair {
  std::vector<double> log_x, log_y, mass_x, mass_y;
};

inline AxisPair sample_axes(const BetaPedestrian& bp, const BBox& region, std::size_t n) {
  const double cw = region.width() / static_cast<double>(n);
  const double ch = region.height() / static_cast<double>(n);
  auto x = axis_mass(bp.boundary.l, bp.boundary.r, bp.x, region.l, cw, n);
  auto y = axis_mass(bp.boundary.t, bp.boundary.b, bp.y, region.t, ch, n);
  return {std::move(x.log), std::move(y.log), std::move(x.mass), std::move(y.mass)};
}

}  // namespace detail

inline double PMFGrid::sum() const { return detail::compensated_sum(values); }

/// Smallest region covering both boundaries; the shared grid for a pair.
inline BBox shared_region(const BetaPedestrian& a, const BetaPedestrian& b) noexcept {
  return enclose(a.boundary, b.boundary);
}

/// Samples the pedestrian's 2D density at the centers of a resolution ×
/// resolution grid over `region`, floors every cell at epsilon and
/// renormalizes to unit mass.
inline PMFGrid discretize(const BetaPedestrian& bp, const BBox& region, const GridSpec& spec) {
  spec.validate();
  require_valid(bp);
  require_valid(region, "discretization region");
  if (!region.contains(bp.boundary)) {
    throw CoverageError("region " + to_string(region) + " does not cover boundary " +
                        to_string(bp.boundary));
  }
  const std::size_t n = spec.resolution;
  const auto axes = detail::sample_axes(bp, region, n);
  PMFGrid g;
  g.origin_x = region.l;
  g.origin_y = region.t;
  g.cell_w = region.width() / static_cast<double>(n);
  g.cell_h = region.height() / static_cast<double>(n);
  g.cols = n;
  g.rows = n;
  g.epsilon_floor = spec.epsilon_floor;
  g.values.resize(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      g.values[r * n + c] = std::max(axes.mass_y[r] * axes.mass_x[c], spec.epsilon_floor);
    }
  }
  const double total = detail::compensated_sum(g.values);
  for (double& v : g.values) v /= total;
  return g;
}

/// D(p‖q) = Σ p (log p − log q) in nats over two grids with identical layout.
inline double kl_grid(const PMFGrid& p, const PMFGrid& q) {
  if (!p.same_layout(q) || p.values.size() != q.values.size()) {
    throw ShapeError("KL divergence needs grids with identical origin, cell size and dimensions");
  }
  // Grids from discretize are already floored; the floor here only guards
  // hand-built grids with empty cells.
  const double floor = std::min(p.epsilon_floor, q.epsilon_floor);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double pv = p.values[i];
    if (pv <= 0.0) continue;
    const double qv = q.values[i] > 0.0 ? q.values[i] : floor;
    acc += pv * std::log(pv / qv);
  }
  return acc;
}

/// Closed-form KL(Be(αp, βp) ‖ Be(αq, βq)) in nats.
inline double kl_1d_closed(const BetaParams1D& p, const BetaParams1D& q) {
  using special::digamma;
  using special::log_beta;
  return log_beta(q.alpha, q.beta) - log_beta(p.alpha, p.beta) +
         (p.alpha - q.alpha) * digamma(p.alpha) + (p.beta - q.beta) * digamma(p.beta) +
         (q.alpha - p.alpha + q.beta - p.beta) * digamma(p.alpha + p.beta);
}

/// (D(p‖q) + D(q‖p)) / 2 on the shared grid over the union of both
/// boundaries. Equal to 0.5 * (kl_grid(P, Q) + kl_grid(Q, P)) for the
/// discretized grids, but evaluated from the separable per-axis masses
/// without materializing either grid. Bit-exactly symmetric in (a, b).
inline double sym_kl(const BetaPedestrian& a, const BetaPedestrian& b, const GridSpec& spec) {
  spec.validate();
  require_valid(a);
  require_valid(b);
  const BBox region = shared_region(a, b);
  const std::size_t n = spec.resolution;
  const double eps = spec.epsilon_floor;
  const double log_eps = std::log(eps);

  const auto pa = detail::sample_axes(a, region, n);
  const auto pb = detail::sample_axes(b, region, n);
  const double zp = detail::floored_outer_sum(pa.mass_x, pa.mass_y, eps);
  const double zq = detail::floored_outer_sum(pb.mass_x, pb.mass_y, eps);
  const double inv_zp = 1.0 / zp;
  const double inv_zq = 1.0 / zq;
  const double log_zp = std::log(zp);
  const double log_zq = std::log(zq);

  // Per-row terms (p − q)(log p − log q) are formed in a flat loop and summed
  // with a fixed four-way split, so the result is reproducible and swapping
  // (a, b) negates both factors of every term without changing its value.
  std::vector<double> terms(n);
  double lanes[4] = {0.0, 0.0, 0.0, 0.0};
  const double* mxp = pa.mass_x.data();
  const double* mxq = pb.mass_x.data();
  const double* lxp = pa.log_x.data();
  const double* lxq = pb.log_x.data();
  double* t = terms.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double myp = pa.mass_y[r];
    const double myq = pb.mass_y[r];
    const double lyp = pa.log_y[r];
    const double lyq = pb.log_y[r];
    for (std::size_t c = 0; c < n; ++c) {
      const double p = std::max(myp * mxp[c], eps) * inv_zp;
      const double q = std::max(myq * mxq[c], eps) * inv_zq;
      const double lp = std::max(lyp + lxp[c], log_eps) - log_zp;
      const double lq = std::max(lyq + lxq[c], log_eps) - log_zq;
      t[c] = (p - q) * (lp - lq);
    }
    std::size_t c = 0;
    for (; c + 4 <= n; c += 4) {
      lanes[0] += t[c];
      lanes[1] += t[c + 1];
      lanes[2] += t[c + 2];
      lanes[3] += t[c + 3];
    }
    for (; c < n; ++c) lanes[c % 4] += t[c];
  }
  const double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  return std::max(0.0, 0.5 * total);
}

/// Reference path: materialize both grids and average the two directed divergences.
inline double sym_kl_reference(const BetaPedestrian& a, const BetaPedestrian& b,
                               const GridSpec& spec) {
  const BBox region = shared_region(a, b);
  const PMFGrid p = discretize(a, region, spec);
  const PMFGrid q = discretize(b, region, spec);
  return 0.5 * (kl_grid(p, q) + kl_grid(q, p));
}

}  // namespace betarep
