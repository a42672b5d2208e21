#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include "lamelab/errors.hpp"
#include "lamelab/linalg.hpp"
#include "lamelab/multigrid.hpp"
#include "lamelab/voxel_domain.hpp"

namespace lamelab {

/// How the truncated exterior is closed off at the box surface.
enum class OuterBoundary {
  /// Exterior energy of the monopole c/|x - centroid(K)| matched at each face.
  monopole,
  /// f = 0 half a voxel outside the box.
  dirichlet,
};

struct CapacityOptions {
  double tol = 1e-8;  // relative residual of the CG solve
  OuterBoundary boundary = OuterBoundary::monopole;
  std::size_t max_iterations = 0;  // 0: 10 * N^(1/3) * 3
  /// Require the box to be at least 4x the set's diameter.
  bool check_box_size = true;
};

struct CapacityEstimate {
  double value = 0.0;
  int grid_level = 0;  // round(-log2 h)
  double residual = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

inline int grid_level(double h) { return static_cast<int>(std::lround(-std::log2(h))); }

inline void check_capacity_set(const VoxelSet& k, bool check_box) {
  if (k.touches_boundary()) throw DomainError("compact set touches the computational box");
  if (!check_box) return;
  const auto& g = k.grid;
  const double side = g.h * static_cast<double>(std::min({g.dims[0], g.dims[1], g.dims[2]}));
  if (side < 4.0 * k.diameter() * (1.0 - 1e-12))
    throw DomainError("computational box is smaller than 4x the diameter of the set");
}

/// Per-face coefficient of f_p^2 added to the energy at the box surface.
inline double boundary_face_coefficient(const VoxelGrid& g, std::size_t p, std::size_t axis, bool upper,
                                        const Vec3& centroid, OuterBoundary kind) {
  if (kind == OuterBoundary::dirichlet) return 2.0 * g.h;
  Vec3 face = g.center(p);
  face[axis] += (upper ? 0.5 : -0.5) * g.h;
  const Vec3 x = face - centroid;
  const double xn = upper ? x[axis] : -x[axis];
  return g.h * g.h * std::max(0.0, xn) / norm2(x);
}

/// Energy matrix on the voxels outside K and the load from f = 1 on K.
struct CapacitySystem {
  StencilOperator op;
  Field rhs;
  Field boundary_coeff;  // summed face coefficients per voxel
};

/// `fixed` marks voxels held at 1; `centroid` anchors the monopole faces.
inline CapacitySystem capacity_system(const VoxelGrid& g, const std::vector<std::uint8_t>& fixed, const Vec3& c,
                                      OuterBoundary kind) {
  CapacitySystem s{StencilOperator(g.dims), Field(g.size(), 0.0), Field(g.size(), 0.0)};
  const double h = g.h;
  for (std::size_t kk = 0; kk < g.dims[2]; ++kk)
    for (std::size_t j = 0; j < g.dims[1]; ++j)
      for (std::size_t i = 0; i < g.dims[0]; ++i) {
        const std::size_t p = g.index(i, j, kk);
        const std::size_t cc[3] = {i, j, kk};
        const bool free_p = !fixed[p];
        for (std::size_t d = 0; d < 3; ++d) {
          if (cc[d] == 0 && free_p) s.boundary_coeff[p] += boundary_face_coefficient(g, p, d, false, c, kind);
          if (cc[d] + 1 == g.dims[d]) {
            if (free_p) s.boundary_coeff[p] += boundary_face_coefficient(g, p, d, true, c, kind);
            continue;
          }
          const std::size_t q = p + s.op.stride(d);
          const bool free_q = !fixed[q];
          if (free_p && free_q) {
            s.op.weight(d)[p] = h;
            s.op.diag()[p] += h;
            s.op.diag()[q] += h;
          } else if (free_p != free_q) {
            const std::size_t f = free_p ? p : q;
            s.op.diag()[f] += h;
            s.rhs[f] += h;
          }
        }
        if (free_p) s.op.diag()[p] += s.boundary_coeff[p];
      }
  return s;
}

/// h sum_edges (f_p - f_q)^2 + sum_faces coeff f_p^2.
inline double capacity_energy(const VoxelGrid& g, const Field& f, const Field& boundary_coeff) {
  std::vector<double> slab(g.dims[2]);
  parallel_for(g.dims[2], [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.dims[1]; ++j)
      for (std::size_t i = 0; i < g.dims[0]; ++i) {
        const std::size_t p = g.index(i, j, k);
        const std::size_t cc[3] = {i, j, k};
        const std::size_t stride[3] = {1, g.dims[0], g.dims[0] * g.dims[1]};
        for (std::size_t d = 0; d < 3; ++d)
          if (cc[d] + 1 < g.dims[d]) {
            const double df = f[p] - f[p + stride[d]];
            s += g.h * df * df;
          }
        s += boundary_coeff[p] * f[p] * f[p];
      }
    slab[k] = s;
  });
  return pairwise_sum(slab);
}

inline std::size_t default_iteration_cap(const VoxelGrid& g) {
  return static_cast<std::size_t>(10.0 * std::cbrt(static_cast<double>(g.size())) * 3.0);
}

}  // namespace detail

/// Discrete harmonic capacity: minimum of the Dirichlet energy over grid
/// functions equal to 1 on K, by multigrid-preconditioned CG.
inline CapacityEstimate capacity(const VoxelSet& k, const CapacityOptions& opt = {}) {
  CapacityEstimate est;
  est.grid_level = detail::grid_level(k.grid.h);
  if (k.empty()) return est;
  detail::check_capacity_set(k, opt.check_box_size);
  detail::CapacitySystem sys = detail::capacity_system(k.grid, k.member, k.centroid(), opt.boundary);
  Field x(k.grid.size(), 0.0);
  Multigrid mg(sys.op);
  const std::size_t cap = opt.max_iterations ? opt.max_iterations : detail::default_iteration_cap(k.grid);
  const SolveStats st = pcg([&](const Field& a, Field& b) { mg.fine().apply(a, b); },
                            [&](const Field& r, Field& z) { mg.apply(r, z); }, sys.rhs, x, opt.tol, cap);
  est.iterations = st.iterations;
  est.residual = st.relative_residual;
  if (!st.converged)
    throw NoConvergence("capacity solve stopped at relative residual " + std::to_string(st.relative_residual));
  for (std::size_t p = 0; p < x.size(); ++p)
    if (k.member[p]) x[p] = 1.0;
  est.value = detail::capacity_energy(k.grid, x, sys.boundary_coeff);
  return est;
}

struct CapacityPair {
  double equality = 0.0;    // f = 1 on K
  double inequality = 0.0;  // f >= 1 on K
  std::size_t inequality_sweeps = 0;
};

/// Same energy minimized twice: with f = 1 on K (CG) and with f >= 1 on K by
/// projected SOR started from zero.
inline CapacityPair capacity_equivalence_check(const VoxelSet& k, const CapacityOptions& opt = {},
                                               double sor_factor = 1.85, std::size_t max_sweeps = 50000) {
  CapacityPair out;
  if (k.empty()) return out;
  out.equality = capacity(k, opt).value;

  // operator over all voxels, K included
  const std::vector<std::uint8_t> none(k.grid.size(), 0);
  const detail::CapacitySystem full = detail::capacity_system(k.grid, none, k.centroid(), opt.boundary);
  const StencilOperator& a = full.op;
  const auto& g = k.grid;
  Field f(g.size(), 0.0);
  const double stop = std::max(opt.tol, 1e-12);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t kk = 0; kk < g.dims[2]; ++kk)
      for (std::size_t j = 0; j < g.dims[1]; ++j)
        for (std::size_t i = 0; i < g.dims[0]; ++i) {
          const std::size_t p = g.index(i, j, kk);
          const double gs = a.neighbours(f, i, j, kk, p) / a.diag()[p];
          double v = f[p] + sor_factor * (gs - f[p]);
          if (k.member[p]) v = std::max(1.0, v);
          change = std::max(change, std::abs(v - f[p]));
          f[p] = v;
        }
    out.inequality_sweeps = sweep + 1;
    if (change <= stop) break;
  }
  out.inequality = detail::capacity_energy(g, f, full.boundary_coeff);
  return out;
}

// ---------------------------------------------------------------------------
// Dyadic Wiener profile

struct WienerLevel {
  int level = 0;
  double rho = 0.0;
  double cap_ball = 0.0;      // cap(closed B_rho minus Omega)
  double cap_annulus = 0.0;   // cap(closed S_rho minus Omega), S_rho = {rho < |x| < 2 rho}
  double gamma = 0.0;         // cap_annulus / rho
  double partial_sum = 0.0;   // sum_{i <= level} cap_ball_i / rho_i
};

struct WienerProfile {
  double radius = 0.0;
  std::vector<WienerLevel> levels;
  double a_grid = 0.0;  // max gamma
};

struct WienerOptions {
  std::size_t voxels_per_radius = 8;
  CapacityOptions capacity;
};

/// Voxel spacing of a domain description; analytic shapes have none.
inline double domain_resolution(const VoxelDomain& d) { return d.grid.h; }
template <class Shape>
double domain_resolution(const Shape&) {
  return 0.0;
}

/// Finest level allowed by a domain of spacing h: floor(log2(R / (4h))).
inline int max_wiener_level(double radius, double h) {
  if (h <= 0.0) return 30;
  const double l = std::log2(radius / (4.0 * h));
  return l < 0.0 ? -1 : static_cast<int>(std::floor(l + 1e-12));
}

template <class Domain>
WienerProfile wiener_profile(const Domain& dom, double radius, int levels, const WienerOptions& opt = {}) {
  if (!(radius > 0.0)) throw DomainError("Wiener radius must be positive");
  if (levels < 0) throw DomainError("level count must be nonnegative");
  const int finest = max_wiener_level(radius, domain_resolution(dom));
  if (levels > finest)
    throw ResolutionExceeded("level " + std::to_string(levels) + " exceeds the domain resolution (max " +
                             std::to_string(finest) + ")");
  WienerProfile prof;
  prof.radius = radius;
  double sum = 0.0;
  for (int j = 0; j <= levels; ++j) {
    const double rho = std::ldexp(radius, -j);
    const std::size_t n = opt.voxels_per_radius;
    const VoxelGrid gb = VoxelGrid::cube(Vec3{}, 8.0 * rho, 8 * n);
    const VoxelSet ball =
        rasterize_set(gb, [&](const Vec3& x) { return norm(x) <= rho && !dom.open(x); });
    const VoxelGrid ga = VoxelGrid::cube(Vec3{}, 16.0 * rho, 16 * n);
    const VoxelSet ann = rasterize_set(ga, [&](const Vec3& x) {
      const double r = norm(x);
      return r >= rho && r <= 2.0 * rho && !dom.open(x);
    });
    WienerLevel lv;
    lv.level = j;
    lv.rho = rho;
    lv.cap_ball = capacity(ball, opt.capacity).value;
    lv.cap_annulus = capacity(ann, opt.capacity).value;
    lv.gamma = lv.cap_annulus / rho;
    sum += lv.cap_ball / rho;
    lv.partial_sum = sum;
    prof.a_grid = std::max(prof.a_grid, lv.gamma);
    prof.levels.push_back(lv);
  }
  return prof;
}

/// Ordinary least-squares line y = intercept + slope x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
  double r_squared = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw DomainError("line fit needs at least two points");
  const double mx = pairwise_sum(x) / static_cast<double>(n);
  const double my = pairwise_sum(y) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss += e * e;
  }
  f.rms_residual = std::sqrt(ss / static_cast<double>(n));
  f.r_squared = syy > 0.0 ? 1.0 - ss / syy : 1.0;
  return f;
}

}  // namespace lamelab
