#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "betarep/divergence.hpp"
#include "support/oracles.hpp"

namespace betarep {
namespace {

// KL(Be(1.5, 1.5) ‖ Be(2, 2)), frozen from scipy.special (betaln, digamma).
constexpr double kKlHalfToTwo = 0.029246547722271643;

BetaPedestrian make(BBox boundary, double ax, double bx, double ay, double by) {
  return {boundary, {ax, bx}, {ay, by}};
}

BetaPedestrian from_boxes(BBox full, BBox visible) {
  return boxes_to_beta(PairedBoxes::make(full, visible), WeightConfig{});
}

double closed_sym(const BetaParams1D& p, const BetaParams1D& q) {
  return 0.5 * (kl_1d_closed(p, q) + kl_1d_closed(q, p));
}

TEST(GridSpecTest, Validation) {
  EXPECT_NO_THROW(GridSpec{}.validate());
  EXPECT_THROW((GridSpec{4, 1e-12}.validate()), DomainError);
  EXPECT_THROW((GridSpec{128, 0.0}.validate()), DomainError);
  EXPECT_THROW((GridSpec{128, 1e-6}.validate()), DomainError);
}

TEST(DiscretizeTest, SumsToOneAndRespectsFloor) {
  std::mt19937_64 rng(11);
  const GridSpec spec{};
  for (int i = 0; i < 50; ++i) {
    const auto a = boxes_to_beta(testing::random_paired(rng), WeightConfig{});
    const auto b = boxes_to_beta(testing::random_paired(rng), WeightConfig{});
    const auto g = discretize(a, shared_region(a, b), spec);
    EXPECT_NEAR(g.sum(), 1.0, 1e-12);
    EXPECT_EQ(g.values.size(), spec.resolution * spec.resolution);
    for (double v : g.values) ASSERT_GE(v, spec.epsilon_floor * 0.5);
  }
}

TEST(DiscretizeTest, UniformShapeGivesFlatGrid) {
  const auto bp = make({0, 0, 64, 32}, 1, 1, 1, 1);
  const auto g = discretize(bp, bp.boundary, GridSpec{16, 1e-12});
  for (double v : g.values) EXPECT_NEAR(v, 1.0 / 256.0, 1e-15);
}

TEST(DiscretizeTest, OutsideBoundaryOnlyHoldsFloor) {
  const auto bp = make({0, 0, 10, 10}, 2, 2, 2, 2);
  const BBox region{0, 0, 20, 10};
  const auto g = discretize(bp, region, GridSpec{16, 1e-12});
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 8; c < g.cols; ++c) EXPECT_LT(g.at(r, c), 2e-12);
  }
}

TEST(DiscretizeTest, RegionMustCoverBoundary) {
  const auto bp = make({0, 0, 10, 10}, 2, 2, 2, 2);
  EXPECT_THROW(discretize(bp, BBox{1, 0, 10, 10}, GridSpec{}), CoverageError);
}

TEST(DiscretizeTest, NarrowBoundaryKeepsUnitMass) {
  // Boundary narrower than one cell and between two centers.
  const auto bp = make({10.1, 0, 10.2, 100}, 2, 2, 2, 2);
  const auto g = discretize(bp, BBox{0, 0, 128, 100}, GridSpec{128, 1e-12});
  EXPECT_NEAR(g.sum(), 1.0, 1e-12);
  double column = 0.0;
  for (std::size_t r = 0; r < g.rows; ++r) column += g.at(r, 10);
  EXPECT_NEAR(column, 1.0, 1e-6);
}

TEST(KlGridTest, SelfDivergenceIsZero) {
  const auto bp = from_boxes({0, 0, 100, 250}, {10, 10, 60, 200});
  const auto g = discretize(bp, bp.boundary, GridSpec{});
  EXPECT_EQ(kl_grid(g, g), 0.0);
}

TEST(KlGridTest, LayoutMismatchThrows) {
  const auto bp = from_boxes({0, 0, 100, 250}, {10, 10, 60, 200});
  const auto g1 = discretize(bp, bp.boundary, GridSpec{64, 1e-12});
  const auto g2 = discretize(bp, bp.boundary, GridSpec{32, 1e-12});
  const auto g3 = discretize(bp, BBox{-1, 0, 100, 250}, GridSpec{64, 1e-12});
  EXPECT_THROW(kl_grid(g1, g2), ShapeError);
  EXPECT_THROW(kl_grid(g1, g3), ShapeError);
}

TEST(KlGridTest, NonNegativeOnRandomPairs) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto a = boxes_to_beta(testing::random_paired(rng), WeightConfig{});
    const auto b = boxes_to_beta(testing::random_paired(rng), WeightConfig{});
    const BBox region = shared_region(a, b);
    const auto p = discretize(a, region, GridSpec{32, 1e-12});
    const auto q = discretize(b, region, GridSpec{32, 1e-12});
    EXPECT_GE(kl_grid(p, q), -1e-12);
  }
}

TEST(KlClosedTest, KnownValues) {
  EXPECT_EQ(kl_1d_closed({2, 3}, {2, 3}), 0.0);
  EXPECT_NEAR(kl_1d_closed({1.5, 1.5}, {2, 2}), kKlHalfToTwo, 1e-14);
  // Mirrored shapes have equal divergence in both directions.
  EXPECT_NEAR(kl_1d_closed({2, 5}, {5, 2}), 3.25, 1e-12);
  EXPECT_NEAR(kl_1d_closed({5, 2}, {2, 5}), 3.25, 1e-12);
}

TEST(KlClosedTest, MatchesQuadrature) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> shape(1.01, 50.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const BetaParams1D p{shape(rng), shape(rng)};
    const BetaParams1D q{shape(rng), shape(rng)};
    const double exact = kl_1d_closed(p, q);
    const double quad = testing::quadrature_kl_1d(p, q, 4000);
    worst = std::max(worst, std::abs(exact - quad) / std::max(exact, 1e-3));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(SymKlTest, IdenticalIsZeroAndSymmetric) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const auto a = boxes_to_beta(testing::random_paired(rng), WeightConfig{});
    const auto b = boxes_to_beta(testing::random_paired(rng), WeightConfig{});
    EXPECT_EQ(sym_kl(a, a, GridSpec{}), 0.0);
    EXPECT_EQ(sym_kl(a, b, GridSpec{}), sym_kl(b, a, GridSpec{}));
  }
}

TEST(SymKlTest, FastPathMatchesMaterializedGrids) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 100; ++i) {
    // Half the pairs overlap, half are arbitrary.
    const auto a = boxes_to_beta(testing::random_paired(rng), WeightConfig{});
    auto b = boxes_to_beta(testing::random_paired(rng), WeightConfig{});
    if (i % 2 == 0) {
      const double dx = a.boundary.l - b.boundary.l + 0.3 * a.boundary.width();
      const double dy = a.boundary.t - b.boundary.t;
      b.boundary = {b.boundary.l + dx, b.boundary.t + dy, b.boundary.r + dx, b.boundary.b + dy};
    }
    const GridSpec spec{64, 1e-12};
    const double fast = sym_kl(a, b, spec);
    const double ref = sym_kl_reference(a, b, spec);
    EXPECT_NEAR(fast, ref, 1e-9 * std::max(1.0, ref)) << i;
  }
}

TEST(SymKlTest, IdenticalBoundaryDecomposesPerAxis) {
  // With a floor far below every sampled mass, the grid value isolates the
  // cell-center discretization error.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> shape(1.01, 20.0);
  const BBox box{0, 0, 100, 250};
  const GridSpec spec{128, 1e-300};
  for (int i = 0; i < 200; ++i) {
    const BetaParams1D px{shape(rng), shape(rng)}, py{shape(rng), shape(rng)};
    const BetaParams1D qx{shape(rng), shape(rng)}, qy{shape(rng), shape(rng)};
    const double expected = closed_sym(px, qx) + closed_sym(py, qy);
    const double grid = sym_kl({box, px, py}, {box, qx, qy}, spec);
    EXPECT_NEAR(grid, expected, 0.02 * expected) << i;
  }
}

TEST(SymKlTest, DefaultFloorOnlyUnderestimates) {
  // The floor caps log ratios, so it can only pull the value down relative
  // to the unfloored grid, never up by more than rounding.
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> shape(1.01, 20.0);
  const BBox box{0, 0, 100, 250};
  for (int i = 0; i < 100; ++i) {
    const BetaPedestrian a{box, {shape(rng), shape(rng)}, {shape(rng), shape(rng)}};
    const BetaPedestrian b{box, {shape(rng), shape(rng)}, {shape(rng), shape(rng)}};
    const double floored = sym_kl(a, b, GridSpec{128, 1e-12});
    const double unfloored = sym_kl(a, b, GridSpec{128, 1e-300});
    EXPECT_LE(floored, unfloored * (1.0 + 1e-9));
  }
}

TEST(SymKlTest, InvariantUnderTranslationAndScale) {
  const auto a = from_boxes({0, 0, 100, 250}, {10, 0, 70, 180});
  const auto b = from_boxes({30, 20, 120, 260}, {40, 20, 120, 150});
  const double base = sym_kl(a, b, GridSpec{});
  auto move = [](BetaPedestrian p, double k, double dx, double dy) {
    p.boundary = {k * p.boundary.l + dx, k * p.boundary.t + dy, k * p.boundary.r + dx,
                  k * p.boundary.b + dy};
    return p;
  };
  EXPECT_NEAR(sym_kl(move(a, 1, 512, -77), move(b, 1, 512, -77), GridSpec{}), base, 1e-9 * base);
  EXPECT_NEAR(sym_kl(move(a, 2.5, 3, 4), move(b, 2.5, 3, 4), GridSpec{}), base, 1e-9 * base);
}

TEST(SymKlTest, ResolutionConvergenceOnSharedBoundary) {
  // Two random annotations of the same full box, as for duplicate detections.
  std::mt19937_64 rng(43);
  const auto base = testing::random_paired(rng);
  const auto other = testing::random_paired(rng);
  const BBox full = base.full();
  const BBox ov = other.visible();
  const BBox of = other.full();
  // The other annotation's visible box, mapped into this full box.
  const BBox vis{full.l + (ov.l - of.l) / of.width() * full.width(),
                 full.t + (ov.t - of.t) / of.height() * full.height(),
                 full.l + (ov.r - of.l) / of.width() * full.width(),
                 full.t + (ov.b - of.t) / of.height() * full.height()};
  const auto a = boxes_to_beta(base, WeightConfig{});
  const auto b = from_boxes(full, vis);
  const double oracle = sym_kl(a, b, GridSpec{1024, 1e-12});
  const double r64 = sym_kl(a, b, GridSpec{64, 1e-12});
  const double r256 = sym_kl(a, b, GridSpec{256, 1e-12});
  ASSERT_GT(oracle, 0.1);
  EXPECT_LT(std::abs(r256 - r64) / oracle, 0.01);
  EXPECT_LT(std::abs(r256 - oracle) / oracle, 0.01);
}

TEST(SymKlTest, PartialOverlapDriftsWithResolution) {
  // Where only one boundary covers a cell, the other side holds ε per cell,
  // so the log ratio there shrinks by log 4 per doubling of the resolution.
  // The drift is expected and bounded by log 4 per doubling.
  const auto a = from_boxes({0, 0, 100, 250}, {0, 0, 60, 200});
  const auto b = from_boxes({35, 10, 130, 245}, {60, 10, 130, 160});
  double prev = sym_kl(a, b, GridSpec{64, 1e-12});
  for (std::size_t n : {128, 256, 512}) {
    const double cur = sym_kl(a, b, GridSpec{n, 1e-12});
    EXPECT_LT(cur, prev);
    EXPECT_LT(prev - cur, std::log(4.0));
    prev = cur;
  }
}

TEST(SymKlTest, DisjointBoundariesAreFiniteAndGrowAsFloorShrinks) {
  const auto a = from_boxes({0, 0, 50, 120}, {0, 0, 50, 120});
  const auto b = from_boxes({200, 0, 250, 120}, {200, 0, 250, 120});
  const double coarse = sym_kl(a, b, GridSpec{128, 1e-8});
  const double mid = sym_kl(a, b, GridSpec{128, 1e-12});
  const double fine = sym_kl(a, b, GridSpec{128, 1e-16});
  EXPECT_TRUE(std::isfinite(fine));
  EXPECT_LT(coarse, mid);
  EXPECT_LT(mid, fine);
  // Bounded by log(1/ε) since each side puts almost all mass where the other is floored.
  EXPECT_LT(mid, -std::log(1e-12) + 1.0);
  EXPECT_GT(mid, 10.0);
}

TEST(IouTest, HandComputedValues) {
  EXPECT_NEAR(iou({0, 0, 2, 2}, {1, 0, 3, 2}), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(iou({0, 0, 1, 1}, {1, 0, 2, 1}), 0.0);
  EXPECT_EQ(iou({0, 0, 1, 1}, {5, 5, 6, 6}), 0.0);
  EXPECT_EQ(iou({0, 0, 4, 4}, {0, 0, 4, 4}), 1.0);
  EXPECT_NEAR(iou({0, 0, 4, 4}, {1, 1, 3, 3}), 0.25, 1e-15);
}

TEST(IouTest, MatchesPixelCount) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> coord(0, 30);
  for (int i = 0; i < 200; ++i) {
    int l1 = coord(rng), r1 = coord(rng), t1 = coord(rng), b1 = coord(rng);
    int l2 = coord(rng), r2 = coord(rng), t2 = coord(rng), b2 = coord(rng);
    if (l1 == r1 || t1 == b1 || l2 == r2 || t2 == b2) continue;
    if (l1 > r1) std::swap(l1, r1);
    if (t1 > b1) std::swap(t1, b1);
    if (l2 > r2) std::swap(l2, r2);
    if (t2 > b2) std::swap(t2, b2);
    int inter = 0, uni = 0;
    for (int y = 0; y < 31; ++y) {
      for (int x = 0; x < 31; ++x) {
        const bool in1 = x >= l1 && x < r1 && y >= t1 && y < b1;
        const bool in2 = x >= l2 && x < r2 && y >= t2 && y < b2;
        inter += in1 && in2;
        uni += in1 || in2;
      }
    }
    const BBox a{double(l1), double(t1), double(r1), double(b1)};
    const BBox b{double(l2), double(t2), double(r2), double(b2)};
    EXPECT_NEAR(iou(a, b), double(inter) / uni, 1e-12);
    EXPECT_EQ(iou(a, b), iou(b, a));
  }
}

}  // namespace
}  // namespace betarep
