#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "lamelab/elastic.hpp"
#include "lamelab/errors.hpp"
#include "lamelab/linalg.hpp"

namespace lamelab {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline GaussRule gauss_legendre(std::size_t n) {
  GaussRule g;
  g.nodes.resize(n);
  g.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // one more derivative evaluation at the converged node
    double p0 = 1.0, p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
      p0 = p1;
      p1 = pk;
    }
    if (n == 1) p0 = 1.0;
    dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    g.nodes[i] = -x;
    g.nodes[n - 1 - i] = x;
    g.weights[i] = g.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) g.nodes[n / 2] = 0.0;
  return g;
}

/// Product rule on S^2: Gauss-Legendre in cos(theta) times the uniform rule in phi.
class SphereRule {
 public:
  struct Node {
    Vec3 omega;
    double weight;
  };

  SphereRule(std::size_t n_theta, std::size_t n_phi) : n_theta_(n_theta), n_phi_(n_phi) {
    const GaussRule g = gauss_legendre(n_theta);
    nodes_.reserve(n_theta * n_phi);
    const double dphi = 2.0 * pi / static_cast<double>(n_phi);
    for (std::size_t a = 0; a < n_theta; ++a) {
      const double ct = g.nodes[a];
      const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      for (std::size_t b = 0; b < n_phi; ++b) {
        const double phi = (static_cast<double>(b) + 0.5) * dphi;
        nodes_.push_back({Vec3{st * std::cos(phi), st * std::sin(phi), ct}, g.weights[a] * dphi});
      }
    }
  }

  static SphereRule default_rule() { return SphereRule(32, 64); }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t n_theta() const { return n_theta_; }
  std::size_t n_phi() const { return n_phi_; }
  /// Largest total degree integrated exactly.
  std::size_t exactness_degree() const { return std::min(2 * n_theta_ - 1, n_phi_ - 1); }

  SphereRule refined() const { return SphereRule(2 * n_theta_, 2 * n_phi_); }

 private:
  std::size_t n_theta_, n_phi_;
  std::vector<Node> nodes_;
};

/// Composite Gauss-Legendre rule on [0, r_max] over a set of panel breakpoints.
class RadialRule {
 public:
  struct Node {
    double r;
    double weight;
  };

  RadialRule(std::vector<double> breakpoints, std::size_t nodes_per_panel)
      : breaks_(std::move(breakpoints)), per_panel_(nodes_per_panel) {
    std::sort(breaks_.begin(), breaks_.end());
    breaks_.erase(std::unique(breaks_.begin(), breaks_.end()), breaks_.end());
    if (breaks_.size() < 2 || breaks_.front() != 0.0)
      throw DomainError("radial rule needs breakpoints starting at 0");
    const GaussRule g = gauss_legendre(per_panel_);
    for (std::size_t p = 0; p + 1 < breaks_.size(); ++p) {
      const double a = breaks_[p], b = breaks_[p + 1];
      for (std::size_t q = 0; q < per_panel_; ++q)
        nodes_.push_back({0.5 * (a + b) + 0.5 * (b - a) * g.nodes[q], 0.5 * (b - a) * g.weights[q]});
    }
  }

  static RadialRule uniform(double r_max, std::size_t panels, std::size_t nodes_per_panel) {
    std::vector<double> br;
    for (std::size_t p = 0; p <= panels; ++p) br.push_back(r_max * static_cast<double>(p) / static_cast<double>(panels));
    br.back() = r_max;
    return RadialRule(std::move(br), nodes_per_panel);
  }

  /// Same panels plus extra breakpoints (e.g. where a cutoff switches on).
  RadialRule with_breakpoints(const std::vector<double>& extra) const {
    std::vector<double> br = breaks_;
    for (double e : extra)
      if (e > 0.0 && e < r_max()) br.push_back(e);
    return RadialRule(std::move(br), per_panel_);
  }

  /// Every panel split in two.
  RadialRule refined() const {
    std::vector<double> br;
    for (std::size_t p = 0; p + 1 < breaks_.size(); ++p) {
      br.push_back(breaks_[p]);
      br.push_back(0.5 * (breaks_[p] + breaks_[p + 1]));
    }
    br.push_back(breaks_.back());
    return RadialRule(std::move(br), per_panel_);
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  double r_max() const { return breaks_.back(); }
  std::size_t degree() const { return 2 * per_panel_ - 1; }
  const std::vector<double>& breakpoints() const { return breaks_; }

 private:
  std::vector<double> breaks_;
  std::size_t per_panel_;
  std::vector<Node> nodes_;
};

/// Tensor-product rule on the ball B_{r_max}.
struct PolarGrid {
  SphereRule sphere;
  RadialRule radial;

  /// 32x64 sphere nodes, 16 panels x 8 Gauss nodes on [0, 8].
  static PolarGrid default_grid() { return PolarGrid{SphereRule::default_rule(), RadialRule::uniform(8.0, 16, 8)}; }
  /// Twice the nodes in every direction.
  PolarGrid refined() const { return PolarGrid{sphere.refined(), radial.refined()}; }
};

inline double sphere_integrate(const SphereRule& rule, const std::function<double(const Vec3&)>& f) {
  std::vector<double> terms;
  terms.reserve(rule.size());
  for (const auto& n : rule.nodes()) terms.push_back(n.weight * f(n.omega));
  return pairwise_sum(terms);
}

/// Integral over R^3 of g(r, omega) in polar form. The integrand carries its
/// own r^-1 or r^-2 weight (singular_power); the r^2 Jacobian absorbs it.
inline double volume_integrate_polar(const PolarGrid& grid, const std::function<double(double, const Vec3&)>& g,
                                     int singular_power = 0, double support_tol = 1e-12) {
  if (singular_power < 0 || singular_power > 2)
    throw DomainError("singular power must be 0, 1 or 2");
  const double rm = grid.radial.r_max();
  for (const auto& n : grid.sphere.nodes())
    if (std::abs(g(rm, n.omega)) > support_tol)
      throw NonCompactSupport("integrand does not vanish at r_max = " + std::to_string(rm));
  std::vector<double> shells;
  shells.reserve(grid.radial.nodes().size());
  std::vector<double> terms(grid.sphere.size());
  for (const auto& rn : grid.radial.nodes()) {
    std::size_t q = 0;
    for (const auto& n : grid.sphere.nodes()) terms[q++] = n.weight * g(rn.r, n.omega);
    shells.push_back(rn.weight * rn.r * rn.r * pairwise_sum(terms));
  }
  return pairwise_sum(shells);
}

/// Spherical mean (1/4pi) int_{S^2} u(center + r omega) d sigma; u(center) at r = 0.
template <DisplacementField F>
Vec3 spherical_mean(const SphereRule& rule, const F& u, double r, const Vec3& center = {}) {
  if (r < 0.0) throw DomainError("spherical mean at negative radius");
  if (r == 0.0) return u.value(center);
  std::array<std::vector<double>, 3> terms;
  for (auto& t : terms) t.reserve(rule.size());
  for (const auto& n : rule.nodes()) {
    const Vec3 v = u.value(center + n.omega * r);
    for (std::size_t i = 0; i < 3; ++i) terms[i].push_back(n.weight * v[i]);
  }
  Vec3 m;
  for (std::size_t i = 0; i < 3; ++i) m[i] = pairwise_sum(terms[i]) / (4.0 * pi);
  return m;
}

}  // namespace lamelab
