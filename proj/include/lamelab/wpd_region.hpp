#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lamelab/errors.hpp"
#include "lamelab/linalg.hpp"

namespace lamelab {

enum class FormKind { plus, minus };

/// Coefficient matrix of the lower bound w^T B w for the weighted form.
/// plus: 3x3 on (||D_r u-bar||, ||Dv||, ||div v||), alpha >= 0.
/// minus: 2x2 on (||D_r u-bar||, ||Dv||), -1 < alpha <= 0.
struct QuadraticFormMatrix {
  FormKind kind;
  double alpha;
  SymMatrix entries;
};

struct MinorValues {
  double p1 = 0.0;
  double p2 = 0.0;
  std::optional<double> p3;

  bool all_positive() const { return p1 > 0.0 && p2 > 0.0 && (!p3 || *p3 > 0.0); }
};

namespace detail {
inline const double sqrt2 = std::sqrt(2.0);
inline const double sqrt3 = std::sqrt(3.0);
inline const double sqrt6 = std::sqrt(6.0);
}  // namespace detail

inline QuadraticFormMatrix b_plus(double alpha) {
  if (!(alpha >= 0.0)) throw DomainError("B+ is defined for alpha >= 0, got " + std::to_string(alpha));
  using detail::sqrt2;
  using detail::sqrt3;
  const double a = alpha, ap2 = alpha + 2.0;
  SymMatrix m(3);
  m(0, 0) = 1.0 + a / 3.0 * (2.0 * a + 3.0) / ap2;
  m(0, 1) = m(1, 0) = -a / (2.0 * sqrt3);
  m(0, 2) = m(2, 0) = -a / (2.0 * sqrt3) * (3.0 * a + 4.0) / ap2;
  m(1, 1) = 1.0 - a / (sqrt2 * ap2);
  m(1, 2) = m(2, 1) = -a / 2.0 * (a + 1.0 / sqrt2) / ap2;
  m(2, 2) = a;
  return {FormKind::plus, alpha, m};
}

inline QuadraticFormMatrix b_minus(double alpha) {
  if (!(alpha > -1.0 && alpha <= 0.0))
    throw DomainError("B- is defined for -1 < alpha <= 0, got " + std::to_string(alpha));
  using detail::sqrt2;
  using detail::sqrt3;
  const double a = alpha, ap2 = alpha + 2.0;
  SymMatrix m(2);
  m(0, 0) = 1.0 + a / 3.0 * (2.0 * a + 3.0) / ap2;
  m(0, 1) = m(1, 0) = a / 2.0 * (3.0 * a + 4.0) / ap2 + a / (2.0 * sqrt3);
  m(1, 1) = 1.0 + 3.0 * a + a / ap2 * (1.0 + (1.0 + sqrt3) / sqrt2 - sqrt3 * a);
  return {FormKind::minus, alpha, m};
}

/// B- for alpha <= 0 (identity at alpha = 0), B+ otherwise.
inline QuadraticFormMatrix applicable_form_matrix(double alpha) {
  return alpha <= 0.0 ? b_minus(alpha) : b_plus(alpha);
}

/// Determinants of the leading principal minors.
inline MinorValues minors(const QuadraticFormMatrix& m) {
  MinorValues v;
  v.p1 = m.entries.leading_minor(1);
  v.p2 = m.entries.leading_minor(2);
  if (m.kind == FormKind::plus) v.p3 = m.entries.leading_minor(3);
  return v;
}

// Closed-form minor polynomials. p_{-,1} coincides with p_{+,1}.

inline double p_plus_1(double a) { return (2.0 * a * a + 6.0 * a + 6.0) / (3.0 * (a + 2.0)); }

inline double p_plus_2(double a) {
  using detail::sqrt2;
  const double poly = a * a * a * a - 4.0 * (1.0 - sqrt2) * a * a * a - 12.0 * (3.0 - sqrt2) * a * a -
                      12.0 * (6.0 - sqrt2) * a - 48.0;
  return -poly / (12.0 * (a + 2.0) * (a + 2.0));
}

inline double p_plus_3(double a) {
  using detail::sqrt2;
  const double a2 = a * a, a3 = a2 * a, a4 = a3 * a, a5 = a4 * a;
  const double poly = 6.0 * a5 + (23.0 + 3.0 * sqrt2) * a4 + (13.0 + 19.0 * sqrt2) * a3 -
                      (77.0 - 38.0 * sqrt2) * a2 - (157.0 - 24.0 * sqrt2) * a - 96.0;
  const double ap2 = a + 2.0;
  return -a * poly / (12.0 * ap2 * ap2 * ap2);
}

inline double p_minus_1(double a) { return p_plus_1(a); }

inline double p_minus_2(double a) {
  using detail::sqrt2;
  using detail::sqrt3;
  using detail::sqrt6;
  const double a2 = a * a, a3 = a2 * a, a4 = a3 * a;
  const double poly = -(2.0 + 7.0 * sqrt3) * a4 + 2.0 * (15.0 + sqrt2 - 11.0 * sqrt3 + sqrt6) * a3 +
                      2.0 * (57.0 + 3.0 * sqrt2 - 10.0 * sqrt3 + 3.0 * sqrt6) * a2 +
                      6.0 * (20.0 + sqrt2 + sqrt6) * a + 24.0;
  return poly / (6.0 * (a + 2.0) * (a + 2.0));
}

/// Closed-form chain for the matrix kind at its alpha.
inline MinorValues closed_form_minors(FormKind kind, double alpha) {
  MinorValues v;
  if (kind == FormKind::plus) {
    v.p1 = p_plus_1(alpha);
    v.p2 = p_plus_2(alpha);
    v.p3 = p_plus_3(alpha);
  } else {
    v.p1 = p_minus_1(alpha);
    v.p2 = p_minus_2(alpha);
  }
  return v;
}

/// q(alpha) = (alpha + 1)(3 alpha + 4)^2 - alpha^4 / 4.
inline double necessary_q(double alpha) {
  const double t = 3.0 * alpha + 4.0;
  return (alpha + 1.0) * t * t - alpha * alpha * alpha * alpha / 4.0;
}

/// d2(omega; alpha), the 2x2 leading minor of the necessary-condition matrix A(omega; alpha).
inline double d2(const Vec3& w, double alpha) {
  const double s = alpha + 2.0 + alpha * w[0] * w[0];
  const double a2 = alpha * alpha;
  return 4.0 * (alpha + 1.0) * s * s - a2 * a2 * w[0] * w[0] * w[1] * w[1];
}

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

/// Bisection of a sign change in [lo, hi] down to width <= tol.
inline Bracket bisect(const std::function<double(double)>& f, double lo, double hi, double tol) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return {lo, lo};
  if (fhi == 0.0) return {hi, hi};
  if ((flo > 0.0) == (fhi > 0.0)) throw BracketFailure("no sign change in bisection interval");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return {mid, mid};
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return {lo, hi};
}

/// Scan [from, to] (either direction) in steps of `step` and bisect the first
/// sign change met.
inline Bracket first_sign_change(const std::function<double(double)>& f, double from, double to, double step,
                                 double tol) {
  const double dir = to > from ? 1.0 : -1.0;
  const auto n = static_cast<long>(std::ceil(std::abs(to - from) / step));
  double x0 = from, f0 = f(x0);
  for (long k = 1; k <= n; ++k) {
    const double x1 = (k == n) ? to : from + dir * step * static_cast<double>(k);
    const double f1 = f(x1);
    if (f0 == 0.0) return {x0, x0};
    if ((f0 > 0.0) != (f1 > 0.0) || f1 == 0.0) {
      return dir > 0 ? bisect(f, x0, x1, tol) : bisect(f, x1, x0, tol);
    }
    x0 = x1;
    f0 = f1;
  }
  throw BracketFailure("no sign change found while scanning for a root");
}

/// Number of sign changes of f on a uniform sample of [lo, hi].
inline int count_sign_changes(const std::function<double(double)>& f, double lo, double hi, double step) {
  int changes = 0;
  double prev = f(lo);
  const auto n = static_cast<long>(std::ceil((hi - lo) / step));
  for (long k = 1; k <= n; ++k) {
    const double x = (k == n) ? hi : lo + step * static_cast<double>(k);
    const double v = f(x);
    if ((v > 0.0) != (prev > 0.0)) ++changes;
    prev = v;
  }
  return changes;
}

struct RegionReport {
  double alpha_minus = 0.0;
  double alpha_plus = 0.0;
  double alpha_minus_critical = 0.0;
  double alpha_plus_critical = 0.0;
  Bracket alpha_minus_bracket, alpha_plus_bracket, alpha_minus_critical_bracket, alpha_plus_critical_bracket;
  /// Widest of the four brackets.
  double bracket_width = 0.0;
};

inline constexpr double root_scan_step = 1e-3;
inline constexpr double alpha_scan_max = 50.0;

struct IntervalRoots {
  Bracket minus;
  Bracket plus;
};

/// alpha_+ = largest root of p_{+,3} in (0, 50]; alpha_- = smallest root of p_{-,2} in (-1, 0).
inline IntervalRoots positivity_interval(double tol) {
  if (!(tol > 0.0)) throw DomainError("root tolerance must be positive");
  IntervalRoots r;
  r.plus = first_sign_change(p_plus_3, alpha_scan_max, root_scan_step, root_scan_step, tol);
  r.minus = first_sign_change(p_minus_2, -1.0 + root_scan_step, -root_scan_step, root_scan_step, tol);
  return r;
}

/// The two real roots of q where it changes sign on (-1, 0) and (0, 50].
inline IntervalRoots critical_roots(double tol) {
  if (!(tol > 0.0)) throw DomainError("root tolerance must be positive");
  IntervalRoots r;
  r.minus = first_sign_change(necessary_q, -1.0 + root_scan_step, 0.0, root_scan_step, tol);
  r.plus = first_sign_change(necessary_q, alpha_scan_max, 0.0, root_scan_step, tol);
  return r;
}

inline RegionReport region_report(double tol) {
  const auto pos = positivity_interval(tol);
  const auto crit = critical_roots(tol);
  RegionReport rep;
  rep.alpha_minus_bracket = pos.minus;
  rep.alpha_plus_bracket = pos.plus;
  rep.alpha_minus_critical_bracket = crit.minus;
  rep.alpha_plus_critical_bracket = crit.plus;
  rep.alpha_minus = pos.minus.mid();
  rep.alpha_plus = pos.plus.mid();
  rep.alpha_minus_critical = crit.minus.mid();
  rep.alpha_plus_critical = crit.plus.mid();
  rep.bracket_width = std::max({pos.minus.width(), pos.plus.width(), crit.minus.width(), crit.plus.width()});
  return rep;
}

/// Fibonacci lattice of n points on S^2 plus the witness point (2^-1/2, 2^-1/2, 0).
inline std::vector<Vec3> fibonacci_sphere(std::size_t n) {
  std::vector<Vec3> pts;
  pts.reserve(n + 1);
  const double golden = pi * (3.0 - std::sqrt(5.0));
  for (std::size_t k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(n);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(k);
    pts.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
  }
  const double h = 1.0 / std::sqrt(2.0);
  pts.push_back({h, h, 0.0});
  return pts;
}

namespace detail {
inline Vec3 spherical_to_cartesian(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}
}  // namespace detail

/// Minimum of d2(omega; alpha) over S^2: grid search on a Fibonacci lattice
/// (witness point included), then compass-search polishing of the best few
/// grid points. The result never exceeds the witness value q(alpha).
inline double d2_minimum(double alpha, std::size_t sphere_samples = 4096) {
  if (!(alpha > -1.0)) throw InvalidParameter("d2 minimum needs alpha > -1");
  const auto pts = fibonacci_sphere(sphere_samples);
  std::vector<std::pair<double, std::size_t>> vals;
  vals.reserve(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) vals.push_back({d2(pts[k], alpha), k});
  const std::size_t keep = std::min<std::size_t>(8, vals.size());
  std::partial_sort(vals.begin(), vals.begin() + static_cast<long>(keep), vals.end());
  double best = vals.front().first;
  for (std::size_t s = 0; s < keep; ++s) {
    const Vec3 p = pts[vals[s].second];
    double theta = std::acos(std::clamp(p[2], -1.0, 1.0));
    double phi = std::atan2(p[1], p[0]);
    double f = vals[s].first;
    double step = 0.05;
    while (step > 1e-12) {
      bool moved = false;
      const double cand[4][2] = {{step, 0}, {-step, 0}, {0, step}, {0, -step}};
      for (const auto& c : cand) {
        const double ft = d2(detail::spherical_to_cartesian(theta + c[0], phi + c[1]), alpha);
        if (ft < f) {
          f = ft;
          theta += c[0];
          phi += c[1];
          moved = true;
          break;
        }
      }
      if (!moved) step *= 0.5;
    }
    best = std::min(best, f);
  }
  return best;
}

}  // namespace lamelab
