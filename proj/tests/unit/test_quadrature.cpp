#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lamelab/fields.hpp"
#include "lamelab/quadrature.hpp"

using namespace lamelab;

namespace {

/// u = (x1^2 - x2^2, x1 x2 x3, x3) + c: every component harmonic.
struct HarmonicField {
  Vec3 c{0.5, -1.0, 2.0};
  double support_radius() const { return 1e9; }
  Vec3 value(const Vec3& x) const { return Vec3{x[0] * x[0] - x[1] * x[1], x[0] * x[1] * x[2], x[2]} + c; }
  Mat3 jacobian(const Vec3& x) const {
    Mat3 m;
    m(0, 0) = 2 * x[0];
    m(1, 0) = -2 * x[1];
    m(0, 1) = x[1] * x[2];
    m(1, 1) = x[0] * x[2];
    m(2, 1) = x[0] * x[1];
    m(2, 2) = 1.0;
    return m;
  }
  Hessians hessians(const Vec3&) const { return Hessians{}; }
};

}  // namespace

TEST(GaussLegendre, ExactForPolynomialsUpToDegree2nMinus1) {
  for (std::size_t n : {1, 2, 5, 8, 16}) {
    const GaussRule g = gauss_legendre(n);
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    EXPECT_NEAR(wsum, 2.0, 1e-14);
    for (std::size_t d = 0; d <= 2 * n - 1; ++d) {
      double q = 0.0;
      for (std::size_t i = 0; i < n; ++i) q += g.weights[i] * std::pow(g.nodes[i], static_cast<double>(d));
      const double exact = d % 2 ? 0.0 : 2.0 / static_cast<double>(d + 1);
      EXPECT_NEAR(q, exact, 1e-13) << "n " << n << " degree " << d;
    }
  }
}

TEST(SphereRule, MomentsOfTheUnitSphere) {
  const SphereRule rule = SphereRule::default_rule();
  EXPECT_EQ(rule.size(), 32u * 64u);
  EXPECT_EQ(rule.exactness_degree(), 63u);
  EXPECT_NEAR(sphere_integrate(rule, [](const Vec3&) { return 1.0; }), 4.0 * pi, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(sphere_integrate(rule, [i](const Vec3& w) { return w[i] * w[i]; }), 4.0 * pi / 3.0, 1e-12);
    EXPECT_NEAR(sphere_integrate(rule, [i](const Vec3& w) { return std::pow(w[i], 4); }), 4.0 * pi / 5.0, 1e-12);
    EXPECT_NEAR(sphere_integrate(rule, [i](const Vec3& w) { return w[i]; }), 0.0, 1e-13);
  }
  EXPECT_NEAR(sphere_integrate(rule, [](const Vec3& w) { return w[0] * w[0] * w[1] * w[1]; }), 4.0 * pi / 15.0, 1e-12);
}

TEST(SphereRule, RefinedDoublesBothDirections) {
  const SphereRule r = SphereRule(8, 16).refined();
  EXPECT_EQ(r.n_theta(), 16u);
  EXPECT_EQ(r.n_phi(), 32u);
}

TEST(RadialRule, CompositeRuleIntegratesPolynomials) {
  const RadialRule r = RadialRule::uniform(3.0, 4, 5);
  double q = 0.0;
  for (const auto& n : r.nodes()) q += n.weight * std::pow(n.r, 9);
  EXPECT_NEAR(q, std::pow(3.0, 10) / 10.0, 1e-8);
  EXPECT_EQ(r.degree(), 9u);
  EXPECT_DOUBLE_EQ(r.r_max(), 3.0);
}

TEST(RadialRule, BreakpointsAndRefinement) {
  const RadialRule r = RadialRule::uniform(2.0, 2, 4);
  const RadialRule b = r.with_breakpoints({0.25, 5.0, -1.0});
  EXPECT_EQ(b.breakpoints().size(), 4u);
  EXPECT_EQ(b.nodes().size(), 12u);
  const RadialRule f = r.refined();
  EXPECT_EQ(f.breakpoints().size(), 5u);
  EXPECT_THROW(RadialRule({0.5, 1.0}, 4), DomainError);
  EXPECT_THROW(RadialRule({0.0}, 4), DomainError);
}

TEST(VolumeIntegral, GaussianAndSingularWeights) {
  const PolarGrid grid = PolarGrid::default_grid();
  // int exp(-r^2) dx = pi^(3/2); int exp(-r^2) / r dx = 2 pi; int exp(-r^2) / r^2 dx = 2 pi^(3/2)
  EXPECT_NEAR(volume_integrate_polar(grid, [](double r, const Vec3&) { return std::exp(-r * r); }),
              std::pow(pi, 1.5), 1e-12);
  EXPECT_NEAR(volume_integrate_polar(
                  grid, [](double r, const Vec3&) { return std::exp(-r * r) / r; }, 1),
              2.0 * pi, 1e-12);
  EXPECT_NEAR(volume_integrate_polar(
                  grid, [](double r, const Vec3&) { return std::exp(-r * r) / (r * r); }, 2),
              2.0 * std::pow(pi, 1.5), 1e-11);
}

TEST(VolumeIntegral, RejectsIntegrandsAliveAtTheEdge) {
  const PolarGrid grid = PolarGrid::default_grid();
  EXPECT_THROW(volume_integrate_polar(grid, [](double, const Vec3&) { return 1.0; }), NonCompactSupport);
  EXPECT_THROW(volume_integrate_polar(grid, [](double, const Vec3&) { return 0.0; }, 3), DomainError);
}

TEST(SphericalMean, MeanValuePropertyOfHarmonicFields) {
  const SphereRule rule = SphereRule::default_rule();
  const HarmonicField u;
  const Vec3 c{0.3, -0.2, 0.7};
  for (double r : {0.1, 1.0, 2.5}) {
    const Vec3 m = spherical_mean(rule, u, r, c);
    const Vec3 v = u.value(c);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(m[i], v[i], 1e-12);
  }
  const Vec3 at0 = spherical_mean(rule, u, 0.0, c);
  EXPECT_EQ(at0[0], u.value(c)[0]);
  EXPECT_THROW(spherical_mean(rule, u, -1.0), DomainError);
}

TEST(SphericalMean, AgreesWithMonteCarlo) {
  const BumpField u(generate_test_field(11));
  const SphereRule rule = SphereRule::default_rule();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  const double r = 1.3;
  const std::size_t samples = 200000;
  std::array<double, 3> sum{}, sum2{};
  for (std::size_t s = 0; s < samples; ++s) {
    Vec3 w{g(rng), g(rng), g(rng)};
    w *= 1.0 / norm(w);
    const Vec3 v = u.value(w * r);
    for (std::size_t i = 0; i < 3; ++i) {
      sum[i] += v[i];
      sum2[i] += v[i] * v[i];
    }
  }
  const Vec3 m = spherical_mean(rule, u, r);
  for (std::size_t i = 0; i < 3; ++i) {
    const double mean = sum[i] / samples;
    const double sd = std::sqrt(std::max(0.0, sum2[i] / samples - mean * mean) / samples);
    EXPECT_NEAR(m[i], mean, 5.0 * sd + 1e-12) << "component " << i;
  }
}
