#pragma once

#include <concepts>
#include <limits>
#include <string>

#include "lamelab/errors.hpp"
#include "lamelab/linalg.hpp"

namespace lamelab {

/// Coupling constant alpha of L u = -Lap u - alpha grad div u.
/// Construction enforces strong ellipticity, alpha > -1.
class ElasticParameter {
 public:
  explicit ElasticParameter(double alpha) : alpha_(alpha) {
    if (!(alpha > -1.0) || !std::isfinite(alpha))
      throw InvalidParameter("elastic parameter alpha = " + std::to_string(alpha) +
                             " violates strong ellipticity (alpha > -1)");
  }
  double alpha() const { return alpha_; }
  /// alpha / (alpha + 2), the anisotropy factor of the fundamental matrix.
  double beta() const { return alpha_ / (alpha_ + 2.0); }

 private:
  double alpha_;
};

/// c_alpha = (alpha + 2) / (8 pi (alpha + 1)).
inline double constant_c_alpha(const ElasticParameter& p) {
  const double a = p.alpha();
  return (a + 2.0) / (8.0 * pi * (a + 1.0));
}

/// d_alpha = -2 c_alpha / (alpha + 2) = -1 / (4 pi (alpha + 1)).
inline double constant_d_alpha(const ElasticParameter& p) {
  return -1.0 / (4.0 * pi * (p.alpha() + 1.0));
}

/// Fundamental matrix Phi(x) = c_alpha r^-1 (I + beta omega omega^T).
inline Mat3 fundamental_matrix(const ElasticParameter& p, const Vec3& x) {
  const double r = norm(x);
  if (r == 0.0) throw SingularPoint("fundamental matrix evaluated at its pole");
  const Vec3 w = x * (1.0 / r);
  Mat3 m = Mat3::identity() + p.beta() * Mat3::outer(w, w);
  return m * (constant_c_alpha(p) / r);
}

/// Translated weight Phi_y(x) = Phi(x - y).
inline Mat3 fundamental_matrix(const ElasticParameter& p, const Vec3& x, const Vec3& y) {
  if (x == y) throw SingularPoint("fundamental matrix evaluated at x = y");
  return fundamental_matrix(p, x - y);
}

/// Row divergence (D_i Phi_ij)_j = d_alpha r^-2 omega.
inline Vec3 fundamental_matrix_divergence(const ElasticParameter& p, const Vec3& x) {
  const double r = norm(x);
  if (r == 0.0) throw SingularPoint("divergence of the fundamental matrix at the origin");
  return x * (constant_d_alpha(p) / (r * r * r));
}

/// Value, Jacobian and Hessians of a vector field at one point.
struct FieldJet {
  Vec3 value;
  Mat3 jacobian;  // (k, i) = D_k u_i
  Hessians hessians{};
};

/// A smooth vector field with analytic first and second derivatives.
template <class F>
concept DisplacementField = requires(const F& f, const Vec3& x) {
  { f.value(x) } -> std::convertible_to<Vec3>;
  { f.jacobian(x) } -> std::convertible_to<Mat3>;
  { f.hessians(x) } -> std::convertible_to<Hessians>;
  { f.support_radius() } -> std::convertible_to<double>;
};

template <class F>
concept JetField = DisplacementField<F> && requires(const F& f, const Vec3& x) {
  { f.jet(x) } -> std::convertible_to<FieldJet>;
};

/// All derivatives at once; uses the field's fused evaluation when it has one.
template <DisplacementField F>
FieldJet field_jet(const F& f, const Vec3& x) {
  if constexpr (JetField<F>) {
    return f.jet(x);
  } else {
    return FieldJet{f.value(x), f.jacobian(x), f.hessians(x)};
  }
}

/// L u = -D_kk u_i - alpha D_ki u_k evaluated from a Hessian triple.
inline Vec3 lame_from_hessians(double alpha, const Hessians& h) {
  Vec3 out;
  for (std::size_t i = 0; i < 3; ++i) {
    double lap = h[i].trace();
    double graddiv = 0.0;
    for (std::size_t k = 0; k < 3; ++k) graddiv += h[k](k, i);
    out[i] = -lap - alpha * graddiv;
  }
  return out;
}

template <DisplacementField F>
Vec3 lame_apply(const ElasticParameter& p, const F& u, const Vec3& x) {
  return lame_from_hessians(p.alpha(), u.hessians(x));
}

/// Column j of the fundamental matrix viewed as a displacement field, with
/// closed-form derivatives. Not compactly supported; defined for x != 0.
class KelvinColumn {
 public:
  KelvinColumn(const ElasticParameter& p, std::size_t column)
      : c_(constant_c_alpha(p)), beta_(p.beta()), j_(column) {}

  double support_radius() const { return std::numeric_limits<double>::infinity(); }

  Vec3 value(const Vec3& x) const {
    const double r2 = norm2(x), r = std::sqrt(r2);
    Vec3 u;
    for (std::size_t i = 0; i < 3; ++i) u[i] = c_ * (delta(i, j_) / r + beta_ * x[i] * x[j_] / (r2 * r));
    return u;
  }

  Mat3 jacobian(const Vec3& x) const {
    const double r2 = norm2(x), r = std::sqrt(r2), r3 = r2 * r, r5 = r3 * r2;
    const std::size_t j = j_;
    Mat3 d;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < 3; ++i)
        d(k, i) = c_ * (-delta(i, j) * x[k] / r3 +
                        beta_ * ((delta(i, k) * x[j] + delta(j, k) * x[i]) / r3 - 3.0 * x[i] * x[j] * x[k] / r5));
    return d;
  }

  Hessians hessians(const Vec3& x) const {
    const double r2 = norm2(x), r = std::sqrt(r2), r3 = r2 * r, r5 = r3 * r2, r7 = r5 * r2;
    const std::size_t j = j_;
    Hessians h{};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 3; ++l) {
          const double iso = delta(i, j) * (-delta(k, l) / r3 + 3.0 * x[k] * x[l] / r5);
          const double aniso = (delta(i, k) * delta(j, l) + delta(j, k) * delta(i, l)) / r3 -
                               3.0 * (delta(i, k) * x[j] + delta(j, k) * x[i]) * x[l] / r5 -
                               3.0 * (delta(i, l) * x[j] * x[k] + delta(j, l) * x[i] * x[k] +
                                      delta(k, l) * x[i] * x[j]) / r5 +
                               15.0 * x[i] * x[j] * x[k] * x[l] / r7;
          h[i](k, l) = c_ * (iso + beta_ * aniso);
        }
    return h;
  }

 private:
  static double delta(std::size_t a, std::size_t b) { return a == b ? 1.0 : 0.0; }

  double c_;
  double beta_;
  std::size_t j_;
};

}  // namespace lamelab
