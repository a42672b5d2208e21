#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace lamelab {

inline constexpr double pi = 3.14159265358979323846;

/// Fixed-size 3-vector with value semantics.
struct Vec3 {
  std::array<double, 3> v{0.0, 0.0, 0.0};

  constexpr Vec3() = default;
  constexpr Vec3(double x, double y, double z) : v{x, y, z} {}

  constexpr double& operator[](std::size_t i) { return v[i]; }
  constexpr double operator[](std::size_t i) const { return v[i]; }

  constexpr Vec3& operator+=(const Vec3& o) {
    for (std::size_t i = 0; i < 3; ++i) v[i] += o.v[i];
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    for (std::size_t i = 0; i < 3; ++i) v[i] -= o.v[i];
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    for (auto& x : v) x *= s;
    return *this;
  }
  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator-(Vec3 a) { return a *= -1.0; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
constexpr double norm2(const Vec3& a) { return dot(a, a); }

/// Row-major 3x3 matrix. For Jacobians the convention is m(k, i) = D_k u_i.
struct Mat3 {
  std::array<double, 9> a{};

  constexpr double& operator()(std::size_t r, std::size_t c) { return a[3 * r + c]; }
  constexpr double operator()(std::size_t r, std::size_t c) const { return a[3 * r + c]; }

  static constexpr Mat3 identity() {
    Mat3 m;
    m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
    return m;
  }
  static constexpr Mat3 outer(const Vec3& x, const Vec3& y) {
    Mat3 m;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) m(r, c) = x[r] * y[c];
    return m;
  }

  constexpr Mat3& operator+=(const Mat3& o) {
    for (std::size_t i = 0; i < 9; ++i) a[i] += o.a[i];
    return *this;
  }
  constexpr Mat3& operator-=(const Mat3& o) {
    for (std::size_t i = 0; i < 9; ++i) a[i] -= o.a[i];
    return *this;
  }
  constexpr Mat3& operator*=(double s) {
    for (auto& x : a) x *= s;
    return *this;
  }
  friend constexpr Mat3 operator+(Mat3 x, const Mat3& y) { return x += y; }
  friend constexpr Mat3 operator-(Mat3 x, const Mat3& y) { return x -= y; }
  friend constexpr Mat3 operator*(Mat3 x, double s) { return x *= s; }
  friend constexpr Mat3 operator*(double s, Mat3 x) { return x *= s; }

  constexpr Vec3 operator*(const Vec3& x) const {
    Vec3 y;
    for (std::size_t r = 0; r < 3; ++r) y[r] = a[3 * r] * x[0] + a[3 * r + 1] * x[1] + a[3 * r + 2] * x[2];
    return y;
  }
  constexpr Mat3 transposed() const {
    Mat3 t;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) t(c, r) = (*this)(r, c);
    return t;
  }
  constexpr double trace() const { return a[0] + a[4] + a[8]; }
  constexpr double frobenius2() const {
    double s = 0.0;
    for (double x : a) s += x * x;
    return s;
  }
};

/// Hessians of a vector field: h[i](j, k) = D_j D_k u_i.
using Hessians = std::array<Mat3, 3>;

/// Deterministic pairwise (cascade) summation. Result depends only on the
/// order of the input, never on how the caller produced it.
inline double pairwise_sum(std::span<const double> x) {
  constexpr std::size_t leaf = 16;
  if (x.size() <= leaf) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

/// Dense symmetric matrix of small size, used for the quadratic-form matrices.
class SymMatrix {
 public:
  explicit SymMatrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return a_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a_[r * n_ + c]; }

  /// Determinant of the leading k x k block (Gaussian elimination, partial pivoting).
  double leading_minor(std::size_t k) const {
    std::vector<double> m(k * k);
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c) m[r * k + c] = (*this)(r, c);
    double det = 1.0;
    for (std::size_t col = 0; col < k; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < k; ++r)
        if (std::abs(m[r * k + col]) > std::abs(m[piv * k + col])) piv = r;
      if (m[piv * k + col] == 0.0) return 0.0;
      if (piv != col) {
        for (std::size_t c = 0; c < k; ++c) std::swap(m[piv * k + c], m[col * k + c]);
        det = -det;
      }
      det *= m[col * k + col];
      for (std::size_t r = col + 1; r < k; ++r) {
        const double f = m[r * k + col] / m[col * k + col];
        for (std::size_t c = col; c < k; ++c) m[r * k + c] -= f * m[col * k + c];
      }
    }
    return det;
  }

  /// Number of eigenvalues strictly below `shift` (Sylvester inertia of A - shift I,
  /// read off the pivots of an unpivoted LDL^T factorization).
  std::size_t count_below(double shift) const {
    std::vector<double> m(a_);
    for (std::size_t i = 0; i < n_; ++i) m[i * n_ + i] -= shift;
    std::size_t negatives = 0;
    for (std::size_t col = 0; col < n_; ++col) {
      double d = m[col * n_ + col];
      if (d == 0.0) d = -1e-300;
      if (d < 0.0) ++negatives;
      for (std::size_t r = col + 1; r < n_; ++r) {
        const double f = m[r * n_ + col] / d;
        for (std::size_t c = col + 1; c < n_; ++c) m[r * n_ + c] -= f * m[col * n_ + c];
      }
    }
    return negatives;
  }

  /// Smallest eigenvalue by bisection on the inertia count inside the
  /// Gershgorin interval.
  double smallest_eigenvalue(double tol = 1e-14) const {
    double lo = 0.0, hi = 0.0;
    for (std::size_t r = 0; r < n_; ++r) {
      double radius = 0.0;
      for (std::size_t c = 0; c < n_; ++c)
        if (c != r) radius += std::abs((*this)(r, c));
      const double d = (*this)(r, r);
      if (r == 0 || d - radius < lo) lo = d - radius;
      if (r == 0 || d + radius > hi) hi = d + radius;
    }
    lo -= 1e-12;
    hi += 1e-12;
    while (hi - lo > tol * std::max(1.0, std::abs(lo) + std::abs(hi))) {
      const double mid = 0.5 * (lo + hi);
      if (count_below(mid) >= 1)
        hi = mid;
      else
        lo = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  std::size_t n_;
  std::vector<double> a_;
};

}  // namespace lamelab
