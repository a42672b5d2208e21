#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "lamelab/elastic.hpp"
#include "lamelab/fields.hpp"
#include "lamelab/linalg.hpp"
#include "lamelab/quadrature.hpp"

namespace lamelab {

/// Zeroth spherical harmonic of a field on one sphere: u-bar(r) and D_r u-bar(r).
struct SphereMean {
  Vec3 mean;
  Vec3 radial_derivative;
};

/// Field samples on the sphere of radius r about `center`, one per rule node.
struct SphereSlice {
  double r = 0.0;
  std::vector<FieldJet> jets;
};

template <DisplacementField F>
SphereSlice sample_sphere(const SphereRule& rule, const F& u, double r, const Vec3& center = {}) {
  SphereSlice s;
  s.r = r;
  s.jets.reserve(rule.size());
  for (const auto& n : rule.nodes()) s.jets.push_back(field_jet(u, center + n.omega * r));
  return s;
}

/// The radial derivative of the mean is the sphere average of omega . Du,
/// so it is exact for whatever rule produced the slice.
inline SphereMean slice_mean(const SphereRule& rule, const SphereSlice& s) {
  std::array<std::vector<double>, 6> terms;
  for (auto& t : terms) t.reserve(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto& n = rule.nodes()[q];
    const FieldJet& j = s.jets[q];
    for (std::size_t i = 0; i < 3; ++i) {
      terms[i].push_back(n.weight * j.value[i]);
      double radial = 0.0;
      for (std::size_t k = 0; k < 3; ++k) radial += n.omega[k] * j.jacobian(k, i);
      terms[3 + i].push_back(n.weight * radial);
    }
  }
  SphereMean m;
  for (std::size_t i = 0; i < 3; ++i) {
    m.mean[i] = pairwise_sum(terms[i]) / (4.0 * pi);
    m.radial_derivative[i] = pairwise_sum(terms[3 + i]) / (4.0 * pi);
  }
  return m;
}

/// Dv = Du - omega (x) D_r u-bar, entry (k, i) = D_k u_i - omega_k D_r u-bar_i.
inline Mat3 fluctuation_jacobian(const Mat3& du, const Vec3& omega, const SphereMean& m) {
  return du - Mat3::outer(omega, m.radial_derivative);
}

/// u = u-bar(|x - center|) + v(x), evaluated lazily one sphere at a time.
template <DisplacementField F>
class SplitField {
 public:
  SplitField(const F& base, SphereRule rule, Vec3 center = {})
      : base_(&base), rule_(std::move(rule)), center_(center) {}

  const F& base() const { return *base_; }
  const SphereRule& rule() const { return rule_; }
  const Vec3& center() const { return center_; }

  SphereMean mean(double r) const {
    if (r == 0.0) return SphereMean{base_->value(center_), Vec3{}};
    return slice_mean(rule_, sample_sphere(rule_, *base_, r, center_));
  }

  Vec3 fluctuation(double r, const Vec3& omega) const {
    return base_->value(center_ + omega * r) - mean(r).mean;
  }
  Mat3 fluctuation_jacobian_at(double r, const Vec3& omega) const {
    return fluctuation_jacobian(base_->jacobian(center_ + omega * r), omega, mean(r));
  }

  /// ||v||^2, ||Dv||^2 and ||div v||^2 over the sphere of radius r (L^2(S^2) norms).
  struct SphereNorms {
    double v2 = 0.0;
    double dv2 = 0.0;
    double div2 = 0.0;
  };
  SphereNorms norms(double r) const {
    const SphereSlice s = sample_sphere(rule_, *base_, r, center_);
    const SphereMean m = slice_mean(rule_, s);
    std::vector<double> a, b, c;
    for (std::size_t q = 0; q < rule_.size(); ++q) {
      const auto& n = rule_.nodes()[q];
      const Vec3 v = s.jets[q].value - m.mean;
      const Mat3 dv = fluctuation_jacobian(s.jets[q].jacobian, n.omega, m);
      const double div = dv.trace();
      a.push_back(n.weight * norm2(v));
      b.push_back(n.weight * dv.frobenius2());
      c.push_back(n.weight * div * div);
    }
    return {pairwise_sum(a), pairwise_sum(b), pairwise_sum(c)};
  }

 private:
  const F* base_;
  SphereRule rule_;
  Vec3 center_;
};

template <DisplacementField F>
SplitField<F> split(const F& u, const SphereRule& rule, const Vec3& center = {}) {
  return SplitField<F>(u, rule, center);
}

/// A radial profile f(r) together with f'(r).
using RadialProfile = std::function<std::pair<double, double>(double)>;
/// A scalar field with gradient (Hessian unused here).
using ScalarField = std::function<ScalarJet(const Vec3&)>;

struct OrthogonalityResult {
  double value_integral = 0.0;     // int f(r) g(x) dx
  double gradient_integral = 0.0;  // int r^-1 Df . Dg dx
  bool orthogonal = false;
};

/// Both integrals vanish whenever g has zero spherical means.
inline OrthogonalityResult orthogonality_check(const RadialProfile& f, const ScalarField& g, const PolarGrid& grid,
                                               double tol = 1e-8) {
  std::vector<double> shell_a, shell_b;
  std::vector<double> ta(grid.sphere.size()), tb(grid.sphere.size());
  for (const auto& rn : grid.radial.nodes()) {
    const auto [fv, fd] = f(rn.r);
    std::size_t q = 0;
    for (const auto& n : grid.sphere.nodes()) {
      const ScalarJet gj = g(n.omega * rn.r);
      ta[q] = n.weight * fv * gj.value;
      tb[q] = n.weight * fd * dot(n.omega, gj.grad) / rn.r;
      ++q;
    }
    const double jac = rn.weight * rn.r * rn.r;
    shell_a.push_back(jac * pairwise_sum(ta));
    shell_b.push_back(jac * pairwise_sum(tb));
  }
  OrthogonalityResult res;
  res.value_integral = pairwise_sum(shell_a);
  res.gradient_integral = pairwise_sum(shell_b);
  res.orthogonal = std::abs(res.value_integral) <= tol && std::abs(res.gradient_integral) <= tol;
  return res;
}

struct InequalityPair {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double tol) const { return lhs <= rhs + tol; }
};

/// ||v||^2_omega against (r^2 / 2) ||Dv||^2_omega on the sphere of radius r.
template <DisplacementField F>
InequalityPair poincare_sphere_check(const SplitField<F>& s, double r) {
  if (!(r > 0.0)) throw DomainError("sphere Poincare check needs r > 0");
  const auto nm = s.norms(r);
  return {nm.v2, 0.5 * r * r * nm.dv2};
}

/// ||div v||^2_omega against 3 ||Dv||^2_omega (Cauchy-Schwarz on the trace).
template <DisplacementField F>
InequalityPair div_bound_check(const SplitField<F>& s, double r) {
  const auto nm = s.norms(r);
  return {nm.div2, 3.0 * nm.dv2};
}

}  // namespace lamelab
