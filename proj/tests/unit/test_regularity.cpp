#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lamelab/regularity.hpp"

using namespace lamelab;

namespace {

SolutionGrid constant_solution(std::size_t n) {
  SolutionGrid s;
  s.grid = fixture_grid(n);
  s.open.assign(s.grid.size(), 1);
  s.u[0].assign(s.grid.size(), 1.0);
  s.u[1].assign(s.grid.size(), 0.0);
  s.u[2].assign(s.grid.size(), 0.0);
  return s;
}

Field random_stacked(const VoxelGrid& g, const std::vector<std::uint8_t>& open, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return sample_stacked(g, open, [&](const Vec3&) { return Vec3{u(rng), u(rng), u(rng)}; });
}

}  // namespace

TEST(LameGrid, OperatorIsSymmetricPositive) {
  const VoxelDomain d = rasterize(ConeComplement{}, fixture_grid(12));
  for (double a : {-0.8, 0.0, 0.5, 3.0}) {
    const LameGridOperator op(d.grid, d.open_mask, a);
    const Field x = random_stacked(d.grid, d.open_mask, 1), y = random_stacked(d.grid, d.open_mask, 2);
    Field ax, ay;
    op.apply(x, ax);
    op.apply(y, ay);
    EXPECT_NEAR(dot(ax, y), dot(x, ay), 1e-9 * std::abs(dot(ax, y))) << "alpha " << a;
    EXPECT_GT(dot(ax, x), 0.0) << "alpha " << a;
  }
}

TEST(LameGrid, RecoversADiscreteManufacturedSolution) {
  const VoxelDomain d = rasterize(ConeComplement{}, fixture_grid(16));
  const double a = 0.5;
  const LameGridOperator op(d.grid, d.open_mask, a);
  const Field w = random_stacked(d.grid, d.open_mask, 3);
  Field f;
  op.apply(w, f);
  const SolutionGrid s = solve_lame_system(d.grid, d.open_mask, a, f);
  const std::size_t n = d.grid.size();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < n; ++p) ASSERT_NEAR(s.u[c][p], w[c * n + p], 1e-8);
}

TEST(LameGrid, DecouplesIntoPoissonProblemsAtAlphaZero) {
  const VoxelDomain d = rasterize(HalfSpaceComplement{}, fixture_grid(16));
  const Field f = random_stacked(d.grid, d.open_mask, 4);
  const SolutionGrid s = solve_lame_system(d.grid, d.open_mask, 0.0, f);
  const StencilOperator lap = masked_laplacian(d.grid, d.open_mask);
  const std::size_t n = d.grid.size();
  for (std::size_t c = 0; c < 3; ++c) {
    const Field b(f.begin() + static_cast<long>(c * n), f.begin() + static_cast<long>((c + 1) * n));
    Field x(n, 0.0);
    const SolveStats st = pcg([&](const Field& in, Field& out) { lap.apply(in, out); },
                              [](const Field& r, Field& z) { z = r; }, b, x, 1e-12, 5000);
    ASSERT_TRUE(st.converged);
    for (std::size_t p = 0; p < n; ++p) EXPECT_NEAR(s.u[c][p], x[p], 1e-8);
  }
}

TEST(LameGrid, SecondOrderAgainstASmoothSolution) {
  const ManufacturedResult coarse = manufactured_error(0.5, 16);
  const ManufacturedResult fine = manufactured_error(0.5, 32);
  const double order = std::log2(coarse.max_error / fine.max_error);
  EXPECT_GE(order, 1.7) << coarse.max_error << " -> " << fine.max_error;
  EXPECT_LT(fine.max_error, 0.05);
}

TEST(Dirichlet, ZeroForcingGivesZeroSolution) {
  const VoxelDomain d = rasterize(ConeComplement{}, fixture_grid(16));
  TestFieldSpec none = probe_forcing();
  none.bumps.front().amplitude = Vec3{};
  const SolutionGrid s = solve_dirichlet({d, 0.5, none, 0.5});
  for (const auto& c : s.u)
    for (double v : c) EXPECT_EQ(v, 0.0);
}

TEST(Dirichlet, SolutionVanishesOffTheOpenSet) {
  const VoxelDomain d = rasterize(ConeComplement{}, fixture_grid(32));
  const SolutionGrid s = solve_dirichlet({d, 0.5, probe_forcing(), 0.5});
  double open_max = 0.0;
  for (std::size_t p = 0; p < d.grid.size(); ++p) {
    if (!d.open_at(p)) {
      for (const auto& c : s.u) EXPECT_EQ(c[p], 0.0);
    } else {
      open_max = std::max(open_max, value_norm2(s, p));
    }
  }
  EXPECT_GT(open_max, 0.0);
}

TEST(Dirichlet, ForcingMustStayAwayFromTheProbeBall) {
  const VoxelDomain d = rasterize(ConeComplement{}, fixture_grid(16));
  TestFieldSpec f = probe_forcing();
  f.bumps.front().center = Vec3{0.3, 0.0, 0.0};
  EXPECT_THROW(solve_dirichlet({d, 0.5, f, 0.5}), DomainError);
  EXPECT_THROW(solve_dirichlet({d, -1.5, probe_forcing(), 0.5}), InvalidParameter);
}

TEST(Profile, ConstantFieldHasScaleFreeMeans) {
  const SolutionGrid s = constant_solution(64);
  const DecayReport r = modulus_profile(s, {0.5, 0.25, 0.125});
  const double annulus = 4.0 * pi / 3.0 * 7.0, ball = 4.0 * pi / 3.0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(r.m_rho[i], annulus, 0.06 * annulus) << "level " << i;
    EXPECT_NEAR(r.M_rho[i], ball, 0.06 * ball) << "level " << i;
    EXPECT_EQ(r.phi_rho[i], 1.0);
    EXPECT_EQ(r.psi_rho[i], 0.0);
  }
  EXPECT_THROW(modulus_profile(s, {0.0}), DomainError);
}

TEST(DecayFit, RecoversASyntheticRate) {
  DecayReport r;
  r.radii = {0.5, 0.25, 0.125, 0.0625};
  r.wiener_partials = {1.0, 2.0, 3.0, 4.0};
  for (double w : r.wiener_partials) {
    r.phi_rho.push_back(0.7 * std::exp(-w));
    r.psi_rho.push_back(0.3 * std::exp(-w));
  }
  EXPECT_NEAR(decay_vs_wiener(r), 1.0, 1e-6);
  EXPECT_EQ(r.status, "decay");
  EXPECT_NEAR(r.fit_residual, 0.0, 1e-12);

  std::reverse(r.phi_rho.begin(), r.phi_rho.end());
  std::reverse(r.psi_rho.begin(), r.psi_rho.end());
  EXPECT_LT(decay_vs_wiener(r), 0.0);
  EXPECT_EQ(r.status, "no-decay");
}

TEST(DecayFit, DegenerateInputs) {
  DecayReport r;
  r.radii = {0.5, 0.25, 0.125, 0.0625};
  r.wiener_partials = {0.0, 0.0, 0.0, 0.0};
  r.phi_rho = {1.0, 1.0, 1.0, 1.0};
  r.psi_rho = {0.0, 0.0, 0.0, 0.0};
  EXPECT_EQ(decay_vs_wiener(r), 0.0);
  EXPECT_EQ(r.status, "no-decay-expected");
  r.wiener_partials = {1.0, 2.0, 3.0, 4.0};
  r.phi_rho = {1.0, 0.0, 1.0, 1.0};
  decay_vs_wiener(r);
  EXPECT_EQ(r.status, "zero-solution");
  r.radii.pop_back();
  EXPECT_THROW(decay_vs_wiener(r), InsufficientLevels);
}

TEST(Cutoff, SmoothStepBetweenFourAndFiveThirds) {
  EXPECT_EQ(cutoff_eta(1.0), 1.0);
  EXPECT_EQ(cutoff_eta(4.0 / 3.0), 1.0);
  EXPECT_EQ(cutoff_eta(2.0), 0.0);
  EXPECT_NEAR(cutoff_eta(1.5), 0.5, 1e-12);
  EXPECT_TRUE(in_cutoff_transition(1.5));
  EXPECT_FALSE(in_cutoff_transition(1.2));
}

TEST(Caccioppoli, ZeroFieldAndRefinement) {
  SolutionGrid zero = constant_solution(16);
  zero.u[0].assign(zero.grid.size(), 0.0);
  const InequalityRatio z = caccioppoli_check(zero, 0.25);
  EXPECT_EQ(z.first, 0.0);
  EXPECT_EQ(z.second, 0.0);

  const std::vector<double> radii{0.1, 0.2, 0.4};
  std::vector<double> coarse, fine;
  for (std::size_t n : {48u, 96u}) {
    const VoxelDomain d = rasterize(PointComplement{}, fixture_grid(n));
    const SolutionGrid s = solve_dirichlet({d, 0.5, probe_forcing(), 0.5});
    for (double rho : radii) {
      const InequalityRatio c = caccioppoli_check(s, rho);
      ASSERT_GT(c.second, 0.0);
      EXPECT_TRUE(std::isfinite(c.ratio()));
      (n == 48 ? coarse : fine).push_back(c.ratio());
    }
  }
  for (std::size_t i = 0; i < radii.size(); ++i)
    EXPECT_LT(std::abs(fine[i] - coarse[i]) / fine[i], 0.2) << "rho " << radii[i];
}

TEST(PoincareCapacity, SkippedWithoutCapacity) {
  const SolutionGrid s = constant_solution(16);
  const InequalityRatio r = poincare_capacity_check(s, 0.25, CapacityEstimate{});
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.first, 0.0);
}

TEST(PoincareCapacity, BoundedOnASpike) {
  const ConeComplement spike{pi / 6.0};
  const VoxelDomain d = rasterize(spike, fixture_grid(64));
  const SolutionGrid s = solve_dirichlet({d, 0.5, probe_forcing(), 0.5});
  WienerOptions opt;
  opt.voxels_per_radius = 4;
  const WienerProfile w = wiener_profile(spike, 0.5, 2, opt);
  for (const auto& lv : w.levels) {
    CapacityEstimate cap;
    cap.value = lv.cap_annulus;
    const InequalityRatio r = poincare_capacity_check(s, lv.rho, cap);
    ASSERT_FALSE(r.skipped);
    EXPECT_GT(r.second, 0.0);
    EXPECT_LE(r.ratio(), 100.0) << "rho " << lv.rho;
  }
}

TEST(Probe, RejectsTooFewOrTooFineLevels) {
  const VoxelDomain d = rasterize(ConeComplement{}, fixture_grid(32));
  ProbeOptions opt;
  opt.levels = 2;
  EXPECT_THROW(run_probe(d, opt), ResolutionExceeded);
  opt.levels = 1;
  EXPECT_THROW(run_probe(d, opt), InsufficientLevels);
}
