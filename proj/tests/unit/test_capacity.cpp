#include <gtest/gtest.h>

#include <random>

#include "lamelab/capacity.hpp"

using namespace lamelab;

namespace {

VoxelSet ball_in_box(double rho, std::size_t n, const Vec3& c = {}) {
  return ball_set(VoxelGrid::cube(Vec3{}, 8.0 * rho, n), rho, c);
}

VoxelSet set_union(const VoxelSet& a, const VoxelSet& b) {
  VoxelSet u = a;
  for (std::size_t p = 0; p < u.member.size(); ++p) u.member[p] |= b.member[p];
  return u;
}

}  // namespace

TEST(Capacity, EmptySetHasNone) {
  const VoxelSet none = rasterize_set(fixture_grid(16), [](const Vec3&) { return false; });
  EXPECT_EQ(capacity(none).value, 0.0);
}

TEST(Capacity, BallIsCloseToTheContinuumValue) {
  const CapacityEstimate c = capacity(ball_in_box(0.5, 64));
  EXPECT_NEAR(c.value, 2.0 * pi, 0.05 * 2.0 * pi);
  EXPECT_EQ(c.grid_level, 4);
  EXPECT_LE(c.residual, 1e-8);
}

TEST(Capacity, ScalesLinearlyWithTheSet) {
  const double a = capacity(ball_in_box(0.25, 32)).value;
  const double b = capacity(ball_in_box(0.5, 32)).value;
  EXPECT_NEAR(b / a, 2.0, 1e-6);
}

TEST(Capacity, ConvergesUnderRefinement) {
  const double coarse = capacity(ball_in_box(0.5, 64)).value;
  const double fine = capacity(ball_in_box(0.5, 128)).value;
  EXPECT_LT(std::abs(fine - coarse) / fine, 0.03);
  EXPECT_LT(std::abs(fine - 2.0 * pi), std::abs(coarse - 2.0 * pi));
}

TEST(Capacity, MonotoneAndSubadditive) {
  const VoxelGrid g = VoxelGrid::cube(Vec3{}, 4.0, 32);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> c(-0.35, 0.35), r(0.1, 0.25);
  for (int pair = 0; pair < 4; ++pair) {
    const VoxelSet a = ball_set(g, r(rng), Vec3{c(rng), c(rng), c(rng)});
    const VoxelSet b = ball_set(g, r(rng), Vec3{c(rng), c(rng), c(rng)});
    const VoxelSet u = set_union(a, b);
    const double ca = capacity(a).value, cb = capacity(b).value, cu = capacity(u).value;
    EXPECT_LE(ca, cu * (1.0 + 1e-9)) << "pair " << pair;
    EXPECT_LE(cb, cu * (1.0 + 1e-9)) << "pair " << pair;
    EXPECT_LE(cu, (ca + cb) * (1.0 + 1e-9)) << "pair " << pair;
  }
}

TEST(Capacity, SingleVoxelMatchesTheLatticeGreenFunction) {
  // cap of one lattice site is h / G(0) with G(0) = 0.2527310098 for the unit 7-point Laplacian
  const VoxelGrid g = VoxelGrid::cube(Vec3{}, 4.0, 32);
  const VoxelSet one = rasterize_set(g, [](const Vec3& x) { return norm(x - Vec3{0.0625, 0.0625, 0.0625}) < 0.01; });
  ASSERT_EQ(one.count(), 1u);
  const double want = 0.125 / 0.2527310098;
  EXPECT_NEAR(capacity(one).value, want, 0.01 * want);
}

TEST(Capacity, EqualityAndInequalityMinimizersAgree) {
  const CapacityPair p = capacity_equivalence_check(ball_in_box(0.5, 32));
  EXPECT_NEAR(p.inequality, p.equality, 1e-4 * p.equality);
  EXPECT_GT(p.inequality_sweeps, 0u);
}

TEST(Capacity, DirichletBoxOverestimates) {
  CapacityOptions d;
  d.boundary = OuterBoundary::dirichlet;
  const VoxelSet k = ball_in_box(0.5, 32);
  EXPECT_GT(capacity(k, d).value, capacity(k).value);
}

TEST(Capacity, InputChecks) {
  const VoxelGrid g = VoxelGrid::cube(Vec3{}, 2.0, 16);
  EXPECT_THROW(capacity(rasterize_set(g, [](const Vec3& x) { return x[0] > 0.9; })), DomainError);
  EXPECT_THROW(capacity(ball_set(g, 0.5)), DomainError);
  CapacityOptions unchecked;
  unchecked.check_box_size = false;
  EXPECT_NO_THROW(capacity(ball_set(g, 0.5), unchecked));
  CapacityOptions starved;
  starved.max_iterations = 1;
  EXPECT_THROW(capacity(ball_in_box(0.5, 32), starved), NoConvergence);
}

TEST(Wiener, HalfSpaceTermsAreLevelIndependent) {
  WienerOptions opt;
  opt.voxels_per_radius = 4;
  const WienerProfile prof = wiener_profile(HalfSpaceComplement{}, 0.5, 3, opt);
  ASSERT_EQ(prof.levels.size(), 4u);
  const double g0 = prof.levels[0].gamma;
  EXPECT_GT(g0, 0.0);
  for (const auto& lv : prof.levels) {
    EXPECT_NEAR(lv.gamma, g0, 1e-6 * g0);
    EXPECT_NEAR(lv.partial_sum, (lv.level + 1) * prof.levels[0].partial_sum, 1e-6 * lv.partial_sum);
  }
  EXPECT_EQ(prof.a_grid, std::max({prof.levels[0].gamma, prof.levels[1].gamma, prof.levels[2].gamma,
                                   prof.levels[3].gamma}));
}

TEST(Wiener, PointComplementContributesNothing) {
  WienerOptions opt;
  opt.voxels_per_radius = 4;
  const WienerProfile prof = wiener_profile(PointComplement{}, 0.5, 2, opt);
  for (const auto& lv : prof.levels) {
    EXPECT_EQ(lv.cap_ball, 0.0);
    EXPECT_EQ(lv.partial_sum, 0.0);
  }
}

TEST(Wiener, LevelsLimitedByTheDomainSpacing) {
  const VoxelDomain d = rasterize(ConeComplement{}, fixture_grid(32));
  EXPECT_EQ(max_wiener_level(0.5, d.grid.h), 1);
  EXPECT_THROW(wiener_profile(d, 0.5, 2), ResolutionExceeded);
  EXPECT_THROW(wiener_profile(d, 0.0, 1), DomainError);
  EXPECT_THROW(wiener_profile(d, 0.5, -1), DomainError);
}

TEST(LineFit, ExactLine) {
  const LineFit f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.rms_residual, 0.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
  EXPECT_THROW(fit_line({1}, {2}), DomainError);
  EXPECT_THROW(fit_line({1, 1}, {2, 3}), DomainError);
}
