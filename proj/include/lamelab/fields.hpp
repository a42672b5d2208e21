#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lamelab/elastic.hpp"
#include "lamelab/errors.hpp"
#include "lamelab/linalg.hpp"

namespace lamelab {

/// Value, gradient and Hessian of a scalar function at one point.
struct ScalarJet {
  double value = 0.0;
  Vec3 grad;
  Mat3 hess;

  friend ScalarJet operator*(const ScalarJet& a, const ScalarJet& b) {
    ScalarJet p;
    p.value = a.value * b.value;
    p.grad = a.grad * b.value + b.grad * a.value;
    p.hess = a.hess * b.value + b.hess * a.value + Mat3::outer(a.grad, b.grad) + Mat3::outer(b.grad, a.grad);
    return p;
  }
};

/// phi(f(x)) for a scalar profile with derivatives (phi, phi', phi'').
inline ScalarJet compose(double phi, double dphi, double ddphi, const ScalarJet& inner) {
  ScalarJet out;
  out.value = phi;
  out.grad = inner.grad * dphi;
  out.hess = Mat3::outer(inner.grad, inner.grad) * ddphi + inner.hess * dphi;
  return out;
}

/// C-infinity bump profile exp(1 - 1/(1 - s)) on s in [0, 1), zero beyond.
/// Returns (psi, psi', psi'') with respect to s.
inline std::array<double, 3> bump_profile(double s) {
  if (s >= 1.0) return {0.0, 0.0, 0.0};
  const double t = 1.0 / (1.0 - s);
  const double psi = std::exp(1.0 - t);
  if (psi == 0.0) return {0.0, 0.0, 0.0};
  return {psi, -psi * t * t, psi * (t * t * t * t - 2.0 * t * t * t)};
}

/// C-infinity step from 0 (t <= 0) to 1 (t >= 1), with first and second derivatives.
inline std::array<double, 3> smooth_step(double t) {
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  if (t >= 1.0) return {1.0, 0.0, 0.0};
  const double u = 1.0 - t;
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / u);
  if (a == 0.0) return {0.0, 0.0, 0.0};
  if (b == 0.0) return {1.0, 0.0, 0.0};
  const double da = a / (t * t), dda = a * (1.0 / (t * t * t * t) - 2.0 / (t * t * t));
  const double db = -b / (u * u), ddb = b * (1.0 / (u * u * u * u) - 2.0 / (u * u * u));
  const double s = a + b;
  const double num = da * b - a * db;
  const double dnum = dda * b - a * ddb;
  const double den = s * s, dden = 2.0 * s * (da + db);
  return {a / s, num / den, (dnum * den - num * dden) / (den * den)};
}

/// One smooth compactly supported building block:
/// amplitude * p(x - center) * envelope(x - center).
/// With width == 0 the envelope is psi(|d|^2 / radius^2). With width > 0 it is
/// exp(-|d|^2 / width^2) times a C-infinity step that falls from 1 to 0 over
/// |d|^2 / radius^2 in [gaussian_taper_start, 1]; pick width so the Gaussian
/// is negligible there (see gaussian_width_limit).
struct Bump {
  Vec3 center;
  double radius = 1.0;
  double width = 0.0;
  Vec3 amplitude{1.0, 0.0, 0.0};
  double mod_constant = 1.0;  // p(d) = c + g.d + d^T Q d
  Vec3 mod_linear;
  Mat3 mod_quadratic;  // symmetric
};

inline constexpr double gaussian_taper_start = 0.6;

/// Largest Gaussian width for which the envelope is below 1e-16 where the taper begins.
inline double gaussian_width_limit(double radius) {
  return radius * std::sqrt(gaussian_taper_start / (16.0 * std::log(10.0)));
}

/// Smooth radial cutoff that removes a neighbourhood of `center`:
/// 0 for |x - center| <= inner, 1 for |x - center| >= outer.
struct PoleCutoff {
  Vec3 center;
  double inner = 0.0;
  double outer = 0.0;
};

/// Parameters of a generated test field. The field is a sum of bumps, optionally
/// multiplied by a PoleCutoff so that it vanishes identically near the origin.
struct TestFieldSpec {
  std::vector<Bump> bumps;
  std::uint64_t seed = 0;
  double support_radius = 3.0;
  std::optional<PoleCutoff> cutoff;

  bool origin_excluded() const { return cutoff.has_value(); }
};

/// Extent actually covered by the bumps: max |c| + radius.
inline double bump_extent(const TestFieldSpec& spec) {
  double e = 0.0;
  for (const auto& b : spec.bumps) e = std::max(e, norm(b.center) + b.radius);
  return e;
}

inline TestFieldSpec scaled(TestFieldSpec spec, double factor) {
  for (auto& b : spec.bumps) b.amplitude *= factor;
  return spec;
}

/// Field u + sign * w as one spec (used by the bilinearity checks).
inline TestFieldSpec combined(const TestFieldSpec& u, const TestFieldSpec& w, double sign) {
  TestFieldSpec out = u;
  for (auto b : w.bumps) {
    b.amplitude *= sign;
    out.bumps.push_back(b);
  }
  out.support_radius = std::max(u.support_radius, w.support_radius);
  return out;
}

/// x -> u(x + y).
inline TestFieldSpec shifted(TestFieldSpec spec, const Vec3& y) {
  for (auto& b : spec.bumps) b.center -= y;
  if (spec.cutoff) spec.cutoff->center -= y;
  spec.support_radius += norm(y);
  return spec;
}

/// x -> u(lambda x).
inline TestFieldSpec dilated(TestFieldSpec spec, double lambda) {
  for (auto& b : spec.bumps) {
    b.center *= 1.0 / lambda;
    b.radius /= lambda;
    b.width /= lambda;
    b.mod_linear *= lambda;
    b.mod_quadratic *= lambda * lambda;
  }
  if (spec.cutoff) {
    spec.cutoff->center *= 1.0 / lambda;
    spec.cutoff->inner /= lambda;
    spec.cutoff->outer /= lambda;
  }
  spec.support_radius /= lambda;
  return spec;
}

/// The displacement field described by a TestFieldSpec, with analytic derivatives.
class BumpField {
 public:
  explicit BumpField(TestFieldSpec spec) : spec_(std::move(spec)) {}

  const TestFieldSpec& spec() const { return spec_; }
  double support_radius() const { return spec_.support_radius; }

  FieldJet jet(const Vec3& x) const {
    FieldJet out;
    for (const auto& b : spec_.bumps) accumulate(b, x, out);
    if (spec_.cutoff) apply_cutoff(*spec_.cutoff, x, out);
    return out;
  }
  Vec3 value(const Vec3& x) const { return jet(x).value; }
  Mat3 jacobian(const Vec3& x) const { return jet(x).jacobian; }
  Hessians hessians(const Vec3& x) const { return jet(x).hessians; }

 private:
  static void accumulate(const Bump& b, const Vec3& x, FieldJet& out) {
    const Vec3 d = x - b.center;
    const double inv_r2 = 1.0 / (b.radius * b.radius);
    const double s = norm2(d) * inv_r2;
    if (s >= 1.0) return;
    ScalarJet sj;
    sj.value = s;
    sj.grad = d * (2.0 * inv_r2);
    sj.hess = Mat3::identity() * (2.0 * inv_r2);
    ScalarJet envelope;
    if (b.width > 0.0) {
      const double k = b.radius * b.radius / (b.width * b.width);
      const double g = std::exp(-k * s);
      envelope = compose(g, -k * g, k * k * g, sj);
      const double span = 1.0 - gaussian_taper_start;
      const auto st = smooth_step((s - gaussian_taper_start) / span);
      if (st[0] != 0.0) envelope = envelope * compose(1.0 - st[0], -st[1] / span, -st[2] / (span * span), sj);
    } else {
      const auto prof = bump_profile(s);
      envelope = compose(prof[0], prof[1], prof[2], sj);
    }

    ScalarJet poly;
    const Vec3 qd = b.mod_quadratic * d;
    poly.value = b.mod_constant + dot(b.mod_linear, d) + dot(d, qd);
    poly.grad = b.mod_linear + qd * 2.0;
    poly.hess = b.mod_quadratic * 2.0;

    const ScalarJet s_jet = poly * envelope;
    for (std::size_t i = 0; i < 3; ++i) {
      const double a = b.amplitude[i];
      if (a == 0.0) continue;
      out.value[i] += a * s_jet.value;
      for (std::size_t k = 0; k < 3; ++k) out.jacobian(k, i) += a * s_jet.grad[k];
      out.hessians[i] += s_jet.hess * a;
    }
  }

  static void apply_cutoff(const PoleCutoff& c, const Vec3& x, FieldJet& u) {
    const Vec3 d = x - c.center;
    const double r = norm(d);
    if (r <= c.inner) {
      u = FieldJet{};
      return;
    }
    if (r >= c.outer) return;
    const double width = c.outer - c.inner;
    const auto st = smooth_step((r - c.inner) / width);
    const double chi = st[0], dchi = st[1] / width, ddchi = st[2] / (width * width);
    const Vec3 w = d * (1.0 / r);
    const Vec3 g = w * dchi;
    const Mat3 proj = Mat3::identity() - Mat3::outer(w, w);
    const Mat3 hchi = Mat3::outer(w, w) * ddchi + proj * (dchi / r);

    FieldJet out;
    out.value = u.value * chi;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < 3; ++i) out.jacobian(k, i) = chi * u.jacobian(k, i) + g[k] * u.value[i];
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 3; ++l)
          out.hessians[i](k, l) = chi * u.hessians[i](k, l) + g[k] * u.jacobian(l, i) + g[l] * u.jacobian(k, i) +
                                  hchi(k, l) * u.value[i];
    u = out;
  }

  TestFieldSpec spec_;
};

static_assert(JetField<BumpField>);

/// Knobs for the seeded random field generator.
struct FieldGenOptions {
  int min_bumps = 1;
  int max_bumps = 4;
  double center_radius = 1.0;  // centers drawn uniformly in this ball
  double support_radius = 5.0;
  /// Gaussian envelopes reaching out to support_radius (the default), or
  /// classic compact bumps with radius drawn from [min_radius, max_radius].
  bool gaussian = true;
  double min_width_fraction = 0.75;  // of gaussian_width_limit(radius)
  double max_width_fraction = 0.9;
  double min_radius = 0.8;
  double max_radius = 1.8;
  bool origin_excluded = false;
  /// Inner cutoff radius as a fraction of support_radius; the step ends at 3x that.
  double cutoff_fraction = 0.05;
};

inline PoleCutoff origin_cutoff(double support_radius, double fraction = 0.05) {
  return PoleCutoff{Vec3{}, fraction * support_radius, 3.0 * fraction * support_radius};
}

/// Deterministic random test field. Identical seeds give identical specs.
inline TestFieldSpec generate_test_field(std::uint64_t seed, const FieldGenOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> unit01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  TestFieldSpec spec;
  spec.seed = seed;
  spec.support_radius = opt.support_radius;
  const int n = opt.min_bumps + static_cast<int>(rng() % static_cast<std::uint64_t>(opt.max_bumps - opt.min_bumps + 1));
  for (int m = 0; m < n; ++m) {
    Bump b;
    Vec3 c;
    do {
      c = Vec3{unit(rng), unit(rng), unit(rng)};
    } while (norm2(c) > 1.0);
    b.center = c * opt.center_radius;
    const double room = opt.support_radius - norm(b.center);
    double scale;  // length over which the modulation may vary
    if (opt.gaussian) {
      b.radius = room;
      const double f = opt.min_width_fraction + (opt.max_width_fraction - opt.min_width_fraction) * unit01(rng);
      b.width = f * gaussian_width_limit(b.radius);
      scale = b.width;
    } else {
      b.radius = std::min(opt.min_radius + (opt.max_radius - opt.min_radius) * unit01(rng), room);
      scale = b.radius;
    }
    b.amplitude = Vec3{gauss(rng), gauss(rng), gauss(rng)};
    b.mod_constant = 1.0;
    b.mod_linear = Vec3{unit(rng), unit(rng), unit(rng)} * (0.5 / scale);
    Mat3 q;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i; j < 3; ++j) q(i, j) = q(j, i) = 0.3 * unit(rng) / (scale * scale);
    b.mod_quadratic = q;
    spec.bumps.push_back(b);
  }
  if (opt.origin_excluded) spec.cutoff = origin_cutoff(opt.support_radius, opt.cutoff_fraction);
  return spec;
}

}  // namespace lamelab
