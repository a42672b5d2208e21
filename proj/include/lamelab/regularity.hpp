#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lamelab/capacity.hpp"
#include "lamelab/elastic.hpp"
#include "lamelab/errors.hpp"
#include "lamelab/fields.hpp"
#include "lamelab/multigrid.hpp"
#include "lamelab/voxel_domain.hpp"

namespace lamelab {

/// L u = f on the open voxels of `domain`, u = 0 on every other voxel and
/// outside the grid. The forcing must vanish on B_{2R}.
struct DirichletProblem {
  VoxelDomain domain;
  double alpha = 0.0;
  TestFieldSpec forcing;
  double radius = 0.5;  // R
};

struct SolutionGrid {
  VoxelGrid grid;
  std::vector<std::uint8_t> open;
  std::array<Field, 3> u;  // zero on closed voxels
  double residual = 0.0;
  std::size_t iterations = 0;
  double h() const { return grid.h; }
};

namespace detail {

/// Zero-extended lookup of a stacked 3-component field.
struct StackedView {
  const VoxelGrid& g;
  const Field& x;
  std::size_t n;
  double at(std::size_t comp, long i, long j, long k) const {
    if (i < 0 || j < 0 || k < 0 || i >= static_cast<long>(g.dims[0]) || j >= static_cast<long>(g.dims[1]) ||
        k >= static_cast<long>(g.dims[2]))
      return 0.0;
    return x[comp * n + g.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k))];
  }
};

}  // namespace detail

/// Discrete Lame operator on a stacked field (component c at offset c * N):
/// compact 3-point second differences for -Lap and for the diagonal of
/// grad div, the 4-point cross stencil for the mixed derivatives.
/// Symmetric and positive definite on the open voxels for alpha > -1.
class LameGridOperator {
 public:
  LameGridOperator(const VoxelGrid& g, const std::vector<std::uint8_t>& open, double alpha)
      : g_(g), open_(open), alpha_(alpha), n_(g.size()) {}

  std::size_t size() const { return 3 * n_; }
  std::size_t voxels() const { return n_; }

  void apply(const Field& x, Field& y) const {
    y.assign(3 * n_, 0.0);
    const double inv_h2 = 1.0 / (g_.h * g_.h);
    const double a = alpha_;
    const detail::StackedView v{g_, x, n_};
    parallel_for(g_.dims[2], [&](std::size_t kz) {
      const long k = static_cast<long>(kz);
      for (std::size_t jy = 0; jy < g_.dims[1]; ++jy)
        for (std::size_t ix = 0; ix < g_.dims[0]; ++ix) {
          const std::size_t p = g_.index(ix, jy, kz);
          if (!open_[p]) continue;
          const long i = static_cast<long>(ix), j = static_cast<long>(jy);
          const long c[3] = {i, j, k};
          for (std::size_t comp = 0; comp < 3; ++comp) {
            const double u0 = x[comp * n_ + p];
            double nb = 0.0, axis = 0.0;
            for (std::size_t d = 0; d < 3; ++d) {
              long lo[3] = {c[0], c[1], c[2]}, hi[3] = {c[0], c[1], c[2]};
              --lo[d];
              ++hi[d];
              const double s = v.at(comp, lo[0], lo[1], lo[2]) + v.at(comp, hi[0], hi[1], hi[2]);
              nb += s;
              if (d == comp) axis = s;
            }
            double cross = 0.0;
            for (std::size_t other = 0; other < 3; ++other) {
              if (other == comp) continue;
              auto at = [&](long si, long so) {
                long q[3] = {c[0], c[1], c[2]};
                q[comp] += si;
                q[other] += so;
                return v.at(other, q[0], q[1], q[2]);
              };
              cross += at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1);
            }
            y[comp * n_ + p] = inv_h2 * ((6.0 + 2.0 * a) * u0 - nb - a * axis) - a * 0.25 * inv_h2 * cross;
          }
        }
    });
  }

 private:
  const VoxelGrid& g_;
  const std::vector<std::uint8_t>& open_;
  double alpha_;
  std::size_t n_;
};

/// Masked 7-point Laplacian (-Lap_h with zero values off the open set).
inline StencilOperator masked_laplacian(const VoxelGrid& g, const std::vector<std::uint8_t>& open) {
  StencilOperator op(g.dims);
  const double w = 1.0 / (g.h * g.h);
  for (std::size_t k = 0; k < g.dims[2]; ++k)
    for (std::size_t j = 0; j < g.dims[1]; ++j)
      for (std::size_t i = 0; i < g.dims[0]; ++i) {
        const std::size_t p = g.index(i, j, k);
        if (!open[p]) continue;
        op.diag()[p] = 6.0 * w;
        const std::size_t c[3] = {i, j, k};
        for (std::size_t d = 0; d < 3; ++d)
          if (c[d] + 1 < g.dims[d] && open[p + op.stride(d)]) op.weight(d)[p] = w;
      }
  return op;
}

struct LameSolveOptions {
  double tol = 1e-10;
  std::size_t max_iterations = 2000;
};

/// Solves the discrete Lame system L_h u = f with the stacked right-hand side
/// `rhs` (zero off the open set); block-diagonal scalar multigrid preconditioner.
inline SolutionGrid solve_lame_system(const VoxelGrid& g, const std::vector<std::uint8_t>& open, double alpha,
                                      const Field& rhs, const LameSolveOptions& opt = {}) {
  const ElasticParameter check(alpha);
  (void)check;
  const LameGridOperator op(g, open, alpha);
  Multigrid mg(masked_laplacian(g, open));
  const std::size_t n = g.size();
  Field x(3 * n, 0.0), rc(n), zc(n);
  auto precondition = [&](const Field& r, Field& z) {
    z.resize(3 * n);
    for (std::size_t c = 0; c < 3; ++c) {
      std::copy(r.begin() + static_cast<long>(c * n), r.begin() + static_cast<long>((c + 1) * n), rc.begin());
      mg.apply(rc, zc);
      std::copy(zc.begin(), zc.end(), z.begin() + static_cast<long>(c * n));
    }
  };
  const SolveStats st =
      pcg([&](const Field& a, Field& b) { op.apply(a, b); }, precondition, rhs, x, opt.tol, opt.max_iterations);
  if (!st.converged)
    throw NoConvergence("Lame solve stopped at relative residual " + std::to_string(st.relative_residual));
  SolutionGrid sol;
  sol.grid = g;
  sol.open = open;
  for (std::size_t c = 0; c < 3; ++c) {
    sol.u[c].assign(x.begin() + static_cast<long>(c * n), x.begin() + static_cast<long>((c + 1) * n));
    for (std::size_t p = 0; p < n; ++p)
      if (!open[p]) sol.u[c][p] = 0.0;
  }
  sol.residual = st.relative_residual;
  sol.iterations = st.iterations;
  return sol;
}

/// Samples a vector function at the open voxel centers into a stacked field.
template <class Fn>
Field sample_stacked(const VoxelGrid& g, const std::vector<std::uint8_t>& open, Fn&& f) {
  const std::size_t n = g.size();
  Field out(3 * n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    if (!open[p]) continue;
    const Vec3 v = f(g.center(p));
    for (std::size_t c = 0; c < 3; ++c) out[c * n + p] = v[c];
  }
  return out;
}

inline void check_forcing(const DirichletProblem& prob) {
  for (const auto& b : prob.forcing.bumps)
    if (norm(b.center) - b.radius < 2.0 * prob.radius)
      throw DomainError("forcing support meets B_{2R}");
}

inline SolutionGrid solve_dirichlet(const DirichletProblem& prob, double tol = 1e-10) {
  const ElasticParameter p(prob.alpha);
  check_forcing(prob);
  const BumpField f(prob.forcing);
  const auto& g = prob.domain.grid;
  const Field rhs = sample_stacked(g, prob.domain.open_mask, [&](const Vec3& x) { return f.value(x); });
  LameSolveOptions opt;
  opt.tol = tol;
  return solve_lame_system(g, prob.domain.open_mask, p.alpha(), rhs, opt);
}

/// Manufactured-solution field on [-1, 1]^3: w_c = a_c prod_d sin(k_cd pi (x_d + 1) / 2),
/// which vanishes on the faces of the cube.
class SineProductField {
 public:
  SineProductField() = default;
  SineProductField(std::array<double, 3> amp, std::array<std::array<int, 3>, 3> waves) : amp_(amp), k_(waves) {}

  double support_radius() const { return 2.0; }

  FieldJet jet(const Vec3& x) const {
    FieldJet out;
    for (std::size_t c = 0; c < 3; ++c) {
      double s[3], ds[3], dds[3];
      for (std::size_t d = 0; d < 3; ++d) {
        const double w = k_[c][d] * pi / 2.0;
        const double t = w * (x[d] + 1.0);
        s[d] = std::sin(t);
        ds[d] = w * std::cos(t);
        dds[d] = -w * w * std::sin(t);
      }
      out.value[c] = amp_[c] * s[0] * s[1] * s[2];
      for (std::size_t a = 0; a < 3; ++a) {
        double g = amp_[c];
        for (std::size_t d = 0; d < 3; ++d) g *= (d == a) ? ds[d] : s[d];
        out.jacobian(a, c) = g;
        for (std::size_t b = 0; b < 3; ++b) {
          double hh = amp_[c];
          for (std::size_t d = 0; d < 3; ++d) {
            if (a == b)
              hh *= (d == a) ? dds[d] : s[d];
            else
              hh *= (d == a || d == b) ? ds[d] : s[d];
          }
          out.hessians[c](a, b) = hh;
        }
      }
    }
    return out;
  }
  Vec3 value(const Vec3& x) const { return jet(x).value; }
  Mat3 jacobian(const Vec3& x) const { return jet(x).jacobian; }
  Hessians hessians(const Vec3& x) const { return jet(x).hessians; }

 private:
  std::array<double, 3> amp_{1.0, -0.5, 0.75};
  std::array<std::array<int, 3>, 3> k_{{{1, 1, 1}, {1, 2, 1}, {2, 1, 1}}};
};

/// Box [-1, 1]^3 whose outermost voxel centers sit on the faces and are closed.
inline VoxelDomain manufactured_box(std::size_t cells) {
  VoxelDomain d;
  d.grid.h = 2.0 / static_cast<double>(cells);
  d.grid.dims = {cells + 1, cells + 1, cells + 1};
  d.grid.origin = Vec3{-1.0 - 0.5 * d.grid.h, -1.0 - 0.5 * d.grid.h, -1.0 - 0.5 * d.grid.h};
  d.open_mask.assign(d.grid.size(), 0);
  for (std::size_t k = 1; k < cells; ++k)
    for (std::size_t j = 1; j < cells; ++j)
      for (std::size_t i = 1; i < cells; ++i) d.open_mask[d.grid.index(i, j, k)] = 1;
  return d;
}

struct ManufacturedResult {
  std::size_t cells = 0;
  double h = 0.0;
  double max_error = 0.0;
  double residual = 0.0;
};

/// Solve with f = L w for the analytic w and report max |u - w| on the open voxels.
inline ManufacturedResult manufactured_error(double alpha, std::size_t cells, const SineProductField& w = {},
                                             double tol = 1e-10) {
  const VoxelDomain dom = manufactured_box(cells);
  const auto& g = dom.grid;
  const Field rhs = sample_stacked(g, dom.open_mask, [&](const Vec3& x) { return lame_from_hessians(alpha, w.hessians(x)); });
  LameSolveOptions opt;
  opt.tol = tol;
  const SolutionGrid sol = solve_lame_system(g, dom.open_mask, alpha, rhs, opt);
  ManufacturedResult r{cells, g.h, 0.0, sol.residual};
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!dom.open_mask[p]) continue;
    const Vec3 ex = w.value(g.center(p));
    for (std::size_t c = 0; c < 3; ++c) r.max_error = std::max(r.max_error, std::abs(sol.u[c][p] - ex[c]));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Profiles

struct DecayReport {
  std::vector<double> radii;
  std::vector<double> m_rho, M_rho, phi_rho, psi_rho;
  std::vector<double> wiener_partials;
  double fitted_c2 = 0.0;
  double fit_residual = 0.0;
  std::string status = "not-fitted";
};

/// |Du|^2 at voxel p: the mean of the squared forward and backward
/// differences of the zero-extended field, so a jump to a closed neighbour is
/// seen in full and the sum over voxels is the discrete Dirichlet energy.
inline double gradient_norm2(const SolutionGrid& s, std::size_t p) {
  const auto& g = s.grid;
  const auto c = g.coords(p);
  double sum = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    const std::size_t st = d == 0 ? 1 : (d == 1 ? g.dims[0] : g.dims[0] * g.dims[1]);
    for (std::size_t comp = 0; comp < 3; ++comp) {
      const double u0 = s.u[comp][p];
      const double up = c[d] + 1 < g.dims[d] ? s.u[comp][p + st] : 0.0;
      const double dn = c[d] > 0 ? s.u[comp][p - st] : 0.0;
      sum += 0.5 * ((up - u0) * (up - u0) + (u0 - dn) * (u0 - dn));
    }
  }
  return sum / (g.h * g.h);
}

inline double value_norm2(const SolutionGrid& s, std::size_t p) {
  return s.u[0][p] * s.u[0][p] + s.u[1][p] * s.u[1][p] + s.u[2][p] * s.u[2][p];
}

/// m, M, phi, psi at each radius. Sums run over open voxel centers.
inline DecayReport modulus_profile(const SolutionGrid& s, const std::vector<double>& radii) {
  DecayReport rep;
  rep.radii = radii;
  const auto& g = s.grid;
  const double vol = g.h * g.h * g.h;
  for (double rho : radii) {
    if (!(rho > 0.0)) throw DomainError("profile radius must be positive");
    std::vector<double> ann, ball, psi;
    double phi = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      if (!s.open[p]) continue;
      const double r = norm(g.center(p));
      if (r >= 2.0 * rho) continue;
      const double u2 = value_norm2(s, p);
      if (r > rho) {
        ann.push_back(u2 * vol);
      } else if (r < rho) {
        ball.push_back(u2 * vol);
        phi = std::max(phi, u2);
        psi.push_back(gradient_norm2(s, p) / r * vol);
      }
    }
    const double r3 = rho * rho * rho;
    rep.m_rho.push_back(pairwise_sum(ann) / r3);
    rep.M_rho.push_back(pairwise_sum(ball) / r3);
    rep.phi_rho.push_back(phi);
    rep.psi_rho.push_back(pairwise_sum(psi));
  }
  return rep;
}

/// eta(t): 1 for t <= 4/3, 0 for t >= 5/3, quintic smoothstep in between.
inline double cutoff_eta(double t) {
  const double s = std::clamp((t - 4.0 / 3.0) * 3.0, 0.0, 1.0);
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}
/// Where eta_rho has a nonzero gradient: the annulus 4 rho / 3 < |x| < 5 rho / 3.
inline bool in_cutoff_transition(double t) { return t > 4.0 / 3.0 && t < 5.0 / 3.0; }

struct InequalityRatio {
  double first = 0.0;
  double second = 0.0;
  bool skipped = false;
  double ratio() const { return second > 0.0 ? first / second : 0.0; }
};

/// (rho^-1 int_{annulus} |Du|^2, rho^-3 int_{S_rho} |u|^2).
inline InequalityRatio caccioppoli_check(const SolutionGrid& s, double rho) {
  const auto& g = s.grid;
  const double vol = g.h * g.h * g.h;
  std::vector<double> grad, mass;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!s.open[p]) continue;
    const double t = norm(g.center(p)) / rho;
    if (in_cutoff_transition(t)) grad.push_back(gradient_norm2(s, p) * vol);
    if (t > 1.0 && t < 2.0) mass.push_back(value_norm2(s, p) * vol);
  }
  return {pairwise_sum(grad) / rho, pairwise_sum(mass) / (rho * rho * rho), false};
}

/// (m_rho(u) cap(closed S_rho minus Omega), int_{S_rho} |Du|^2); skipped when the capacity vanishes.
inline InequalityRatio poincare_capacity_check(const SolutionGrid& s, double rho, const CapacityEstimate& cap,
                                               double cap_floor = 1e-12) {
  const auto& g = s.grid;
  const double vol = g.h * g.h * g.h;
  std::vector<double> grad, mass;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!s.open[p]) continue;
    const double t = norm(g.center(p)) / rho;
    if (t > 1.0 && t < 2.0) {
      grad.push_back(gradient_norm2(s, p) * vol);
      mass.push_back(value_norm2(s, p) * vol);
    }
  }
  InequalityRatio out;
  out.second = pairwise_sum(grad);
  if (!(cap.value > cap_floor)) {
    out.skipped = true;
    return out;
  }
  out.first = pairwise_sum(mass) / (rho * rho * rho) * cap.value;
  return out;
}

/// Fits log(phi + psi) = log c1 - c2 W(rho) over the dyadic levels; stores
/// c2 and the fit residual in the report and returns c2.
inline double decay_vs_wiener(DecayReport& rep, double wiener_floor = 1e-9) {
  const std::size_t n = rep.radii.size();
  if (n < 4 || rep.wiener_partials.size() != n || rep.phi_rho.size() != n || rep.psi_rho.size() != n)
    throw InsufficientLevels("decay fit needs at least 4 dyadic levels with Wiener sums");
  const double wmax = *std::max_element(rep.wiener_partials.begin(), rep.wiener_partials.end());
  if (!(wmax > wiener_floor)) {
    rep.status = "no-decay-expected";
    rep.fitted_c2 = 0.0;
    rep.fit_residual = 0.0;
    return 0.0;
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = rep.phi_rho[i] + rep.psi_rho[i];
    if (!(v > 0.0)) {
      rep.status = "zero-solution";
      return 0.0;
    }
    x.push_back(-rep.wiener_partials[i]);
    y.push_back(std::log(v));
  }
  const LineFit f = fit_line(x, y);
  rep.fitted_c2 = f.slope;
  rep.fit_residual = f.rms_residual;
  rep.status = f.slope > 0.0 ? "decay" : "no-decay";
  return f.slope;
}

// ---------------------------------------------------------------------------
// End-to-end probe

struct ProbeOptions {
  double alpha = 0.5;
  double radius = 0.5;  // R
  int levels = 3;       // dyadic levels 0..levels
  double tol = 1e-8;
  WienerOptions wiener;
};

struct ProbeResult {
  DecayReport report;
  WienerProfile wiener;
  std::vector<InequalityRatio> caccioppoli;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Default forcing: one bump in the corner region of [-1, 1]^3, outside B_1.
inline TestFieldSpec probe_forcing() {
  TestFieldSpec f;
  Bump b;
  b.center = Vec3{0.8, 0.8, 0.3};
  b.radius = 0.15;
  b.amplitude = Vec3{1.0, 0.5, -0.25};
  f.bumps.push_back(b);
  f.support_radius = norm(b.center) + b.radius;
  return f;
}

inline ProbeResult run_probe(const VoxelDomain& dom, const ProbeOptions& opt) {
  const int finest = max_wiener_level(opt.radius, dom.grid.h);
  if (opt.levels > finest)
    throw ResolutionExceeded("level " + std::to_string(opt.levels) + " exceeds the domain resolution (max " +
                             std::to_string(finest) + ")");
  if (opt.levels + 1 < 4) throw InsufficientLevels("the probe needs at least 4 dyadic levels");
  DirichletProblem prob{dom, opt.alpha, probe_forcing(), opt.radius};
  const SolutionGrid sol = solve_dirichlet(prob, opt.tol);
  std::vector<double> radii;
  for (int j = 0; j <= opt.levels; ++j) radii.push_back(std::ldexp(opt.radius, -j));
  ProbeResult res;
  res.iterations = sol.iterations;
  res.residual = sol.residual;
  res.report = modulus_profile(sol, radii);
  res.wiener = wiener_profile(dom, opt.radius, opt.levels, opt.wiener);
  for (const auto& lv : res.wiener.levels) res.report.wiener_partials.push_back(lv.partial_sum);
  for (double rho : radii) res.caccioppoli.push_back(caccioppoli_check(sol, rho));
  decay_vs_wiener(res.report);
  return res;
}

}  // namespace lamelab
