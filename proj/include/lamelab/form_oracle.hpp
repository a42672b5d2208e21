#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "lamelab/elastic.hpp"
#include "lamelab/errors.hpp"
#include "lamelab/fields.hpp"
#include "lamelab/parallel.hpp"
#include "lamelab/quadrature.hpp"
#include "lamelab/spherical_split.hpp"
#include "lamelab/wpd_region.hpp"

namespace lamelab {

/// alpha-independent volume integrals from which the weighted form, the
/// split form and the gradient energy are assembled for any alpha.
/// All integrals are about `center`, with r = |x - center| and omega the unit radial vector.
struct FormMoments {
  enum Index : std::size_t {
    lap_dot_u,          // int r^-1 (-Lap u) . u
    graddiv_dot_u,      // int r^-1 (-grad div u) . u
    lap_radial,         // int r^-1 (-Lap u . omega)(omega . u)
    graddiv_radial,     // int r^-1 (-grad div u . omega)(omega . u)
    fluct_cross,        // int r^-2 [v_k (D_k v) . omega - div v (v . omega)]
    mean_grad,          // int r^-1 |D_r u-bar|^2
    mean_grad_axes,     // int r^-1 sum_i (D_r u-bar_i)^2 omega_i^2
    fluct_grad,         // int r^-1 |Dv|^2
    fluct_div,          // int r^-1 (div v)^2
    fluct_radial_rows,  // int r^-1 sum_k |(D_k v) . omega|^2
    div_radial,         // int r^-1 div v [omega_i (D_i v) . omega]
    mean_div,           // int r^-1 (D_r u-bar . omega) div v
    mean_radial,        // int r^-1 (D_r u-bar . omega)[omega_i (D_i v) . omega]
    grad_energy,        // int r^-1 |Du|^2
    count
  };

  Vec3 center;
  Vec3 value_at_center;
  std::array<double, count> m{};

  double operator[](Index i) const { return m[i]; }
};

struct FormReport {
  double lhs = 0.0;
  double point_term = 0.0;
  double bilinear_star = 0.0;
  double residual = 0.0;
  double coercivity_ratio = 0.0;

  double scale() const { return std::abs(lhs) + std::abs(point_term) + std::abs(bilinear_star) + 1.0; }
  bool passes(double rel_tol = 1e-6) const { return std::abs(residual) <= rel_tol * scale(); }
};

/// Largest |x - center| at which the field can be nonzero.
inline double support_extent(const TestFieldSpec& spec, const Vec3& center) {
  double e = 0.0;
  for (const auto& b : spec.bumps) e = std::max(e, norm(b.center - center) + b.radius);
  return e;
}

namespace detail {

using SliceSums = std::array<double, FormMoments::count>;

inline SliceSums slice_sums(const SphereRule& rule, const SphereSlice& s) {
  const SphereMean mean = slice_mean(rule, s);
  const Vec3& dm = mean.radial_derivative;
  std::array<std::vector<double>, FormMoments::count> t;
  for (auto& x : t) x.resize(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto& node = rule.nodes()[q];
    const Vec3& w = node.omega;
    const FieldJet& j = s.jets[q];
    const double wt = node.weight;

    Vec3 lap, graddiv;
    for (std::size_t i = 0; i < 3; ++i) {
      lap[i] = j.hessians[i].trace();
      for (std::size_t k = 0; k < 3; ++k) graddiv[i] += j.hessians[k](k, i);
    }
    const double wu = dot(w, j.value);
    t[FormMoments::lap_dot_u][q] = -wt * dot(lap, j.value);
    t[FormMoments::graddiv_dot_u][q] = -wt * dot(graddiv, j.value);
    t[FormMoments::lap_radial][q] = -wt * dot(lap, w) * wu;
    t[FormMoments::graddiv_radial][q] = -wt * dot(graddiv, w) * wu;

    const Vec3 v = j.value - mean.mean;
    const Mat3 dv = fluctuation_jacobian(j.jacobian, w, mean);
    const Vec3 rows = dv * w;  // rows[k] = (D_k v) . omega
    const double div = dv.trace();
    const double wdw = dot(w, rows);
    const double dmw = dot(dm, w);
    double axes = 0.0;
    for (std::size_t i = 0; i < 3; ++i) axes += dm[i] * dm[i] * w[i] * w[i];

    t[FormMoments::fluct_cross][q] = wt * (dot(v, rows) - div * dot(v, w));
    t[FormMoments::mean_grad][q] = wt * norm2(dm);
    t[FormMoments::mean_grad_axes][q] = wt * axes;
    t[FormMoments::fluct_grad][q] = wt * dv.frobenius2();
    t[FormMoments::fluct_div][q] = wt * div * div;
    t[FormMoments::fluct_radial_rows][q] = wt * norm2(rows);
    t[FormMoments::div_radial][q] = wt * div * wdw;
    t[FormMoments::mean_div][q] = wt * dmw * div;
    t[FormMoments::mean_radial][q] = wt * dmw * wdw;
    t[FormMoments::grad_energy][q] = wt * j.jacobian.frobenius2();
  }
  SliceSums out{};
  for (std::size_t k = 0; k < FormMoments::count; ++k) out[k] = pairwise_sum(t[k]);
  return out;
}

inline constexpr std::size_t cutoff_subpanels = 16;

/// Radial rule with extra panels across the shell where an origin cutoff
/// switches on; the step's flat ends make a single panel converge slowly.
inline RadialRule radial_rule_for(const RadialRule& base, const TestFieldSpec& spec, const Vec3& center,
                                  std::size_t subpanels) {
  if (!spec.cutoff) return base;
  const double off = norm(spec.cutoff->center - center);
  if (off != 0.0) return base;
  std::vector<double> extra;
  const double a = spec.cutoff->inner, b = spec.cutoff->outer;
  for (std::size_t k = 0; k <= subpanels; ++k)
    extra.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(subpanels));
  return base.with_breakpoints(extra);
}

}  // namespace detail

/// One pass over the polar grid centered at `center`. Radial shells beyond
/// the support contribute exactly zero and are skipped.
inline FormMoments form_moments(const TestFieldSpec& spec, const PolarGrid& grid, const Vec3& center = {},
                                std::size_t cutoff_panels = detail::cutoff_subpanels) {
  const double extent = support_extent(spec, center);
  const RadialRule radial = detail::radial_rule_for(grid.radial, spec, center, cutoff_panels);
  if (extent >= radial.r_max())
    throw NonCompactSupport("field support reaches r_max = " + std::to_string(radial.r_max()) +
                            " about the quadrature center");
  const BumpField u(spec);
  const auto& nodes = radial.nodes();
  std::vector<detail::SliceSums> shells(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t n) {
    const double r = nodes[n].r;
    shells[n] = detail::SliceSums{};
    if (r >= extent) return;
    shells[n] = detail::slice_sums(grid.sphere, sample_sphere(grid.sphere, u, r, center));
  });

  FormMoments fm;
  fm.center = center;
  fm.value_at_center = u.value(center);
  std::vector<double> col(nodes.size());
  for (std::size_t k = 0; k < FormMoments::count; ++k) {
    const int power = (k == FormMoments::fluct_cross) ? 2 : 1;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const double r = nodes[n].r;
      const double jac = nodes[n].weight * (power == 2 ? 1.0 : r);
      col[n] = jac * shells[n][k];
    }
    fm.m[k] = pairwise_sum(col);
  }
  return fm;
}

/// int (Lu)^T Phi_center u dx from precomputed moments.
inline double lhs_from_moments(const ElasticParameter& p, const FormMoments& fm) {
  const double a = p.alpha(), b = p.beta();
  using M = FormMoments;
  const double iso = fm[M::lap_dot_u] + a * fm[M::graddiv_dot_u];
  const double aniso = fm[M::lap_radial] + a * fm[M::graddiv_radial];
  return constant_c_alpha(p) * (iso + b * aniso);
}

/// The split form B*(u, u) from precomputed moments.
inline double bstar_from_moments(const ElasticParameter& p, const FormMoments& fm) {
  const double a = p.alpha(), b = p.beta(), ap2 = a + 2.0;
  using M = FormMoments;
  const double r1 = fm[M::mean_grad] + a * (2.0 * a + 3.0) / ap2 * fm[M::mean_grad_axes] + fm[M::fluct_grad] +
                    a * fm[M::fluct_div] + b * fm[M::fluct_radial_rows] + a * a / ap2 * fm[M::div_radial] +
                    a * (3.0 * a + 4.0) / ap2 * fm[M::mean_div] + a * fm[M::mean_radial];
  return constant_c_alpha(p) * (b * fm[M::fluct_cross] + r1);
}

inline double point_term_from_moments(const FormMoments& fm) { return 0.5 * norm2(fm.value_at_center); }

/// At alpha = 0 the split form reduces to c_0 int r^-1 (|D_r u-bar|^2 + |Dv|^2).
inline double alpha0_control(const FormMoments& fm) {
  return (1.0 / (4.0 * pi)) * (fm[FormMoments::mean_grad] + fm[FormMoments::fluct_grad]);
}

inline FormReport report_from_moments(const ElasticParameter& p, const FormMoments& fm) {
  FormReport r;
  r.lhs = lhs_from_moments(p, fm);
  r.point_term = point_term_from_moments(fm);
  r.bilinear_star = bstar_from_moments(p, fm);
  r.residual = r.lhs - r.point_term - r.bilinear_star;
  const double energy = fm[FormMoments::grad_energy];
  r.coercivity_ratio = energy > 0.0 ? (r.lhs - r.point_term) / energy : 0.0;
  return r;
}

inline double lhs_form(const ElasticParameter& p, const TestFieldSpec& u, const PolarGrid& grid, const Vec3& y = {}) {
  return lhs_from_moments(p, form_moments(u, grid, y));
}

inline double bstar_form(const ElasticParameter& p, const TestFieldSpec& u, const PolarGrid& grid) {
  return bstar_from_moments(p, form_moments(u, grid));
}

inline FormReport identity_residual(const ElasticParameter& p, const TestFieldSpec& u, const PolarGrid& grid) {
  return report_from_moments(p, form_moments(u, grid));
}

/// (alpha_-, alpha_+) from the closed-form minors, computed once.
inline const IntervalRoots& proven_interval() {
  static const IntervalRoots roots = positivity_interval(1e-12);
  return roots;
}

inline bool inside_proven_interval(double alpha) {
  const auto& r = proven_interval();
  return alpha > r.minus.hi && alpha < r.plus.lo;
}

/// c_alpha times the smallest eigenvalue of the applicable coefficient matrix.
inline double coercivity_bound(const ElasticParameter& p) {
  return constant_c_alpha(p) * applicable_form_matrix(p.alpha()).entries.smallest_eigenvalue(1e-14);
}

/// (lhs - |u(0)|^2 / 2) / int |Du|^2 |x|^-1 dx.
inline double coercivity_check(const ElasticParameter& p, const TestFieldSpec& u, const PolarGrid& grid) {
  if (!inside_proven_interval(p.alpha()))
    throw DomainError("coercivity bound only holds for alpha inside the proven interval");
  return identity_residual(p, u, grid).coercivity_ratio;
}

// ---------------------------------------------------------------------------
// Counterexample search

struct SearchOptions {
  std::size_t budget = 5000;
  std::uint64_t seed = 0;
  /// Independent workers; fixed so the result does not depend on the thread count.
  std::size_t workers = 4;
  int max_bumps = 6;
  double support_radius = 3.0;
  /// Share of each worker's budget spent on random restarts before descent.
  double random_share = 0.4;
  double threshold = -1e-8;
};

struct SearchResult {
  std::optional<TestFieldSpec> field;  // set only when certified negative
  TestFieldSpec best;
  double best_ratio = std::numeric_limits<double>::infinity();
  double best_lhs_default = 0.0;
  double best_lhs_refined = 0.0;
  std::uint64_t best_worker_seed = 0;
  std::size_t evaluations = 0;
};

namespace detail {

/// Cheap grid used while exploring; candidates are re-checked on the default grid.
inline PolarGrid exploration_grid(double support_radius) {
  return PolarGrid{SphereRule(16, 32), RadialRule::uniform(support_radius + 1.0, 8, 6)};
}

constexpr std::size_t params_per_bump = 16;

inline std::vector<double> flatten(const TestFieldSpec& s) {
  std::vector<double> x;
  for (const auto& b : s.bumps) {
    for (std::size_t i = 0; i < 3; ++i) x.push_back(b.center[i]);
    x.push_back(b.radius);
    for (std::size_t i = 0; i < 3; ++i) x.push_back(b.amplitude[i]);
    for (std::size_t i = 0; i < 3; ++i) x.push_back(b.mod_linear[i]);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i; j < 3; ++j) x.push_back(b.mod_quadratic(i, j));
  }
  return x;
}

inline TestFieldSpec unflatten(TestFieldSpec s, const std::vector<double>& x) {
  std::size_t k = 0;
  for (auto& b : s.bumps) {
    for (std::size_t i = 0; i < 3; ++i) b.center[i] = x[k++];
    b.radius = x[k++];
    for (std::size_t i = 0; i < 3; ++i) b.amplitude[i] = x[k++];
    for (std::size_t i = 0; i < 3; ++i) b.mod_linear[i] = x[k++];
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i; j < 3; ++j) b.mod_quadratic(i, j) = b.mod_quadratic(j, i) = x[k++];
  }
  return s;
}

inline bool admissible(const TestFieldSpec& s) {
  for (const auto& b : s.bumps)
    if (!(b.radius >= 0.2) || norm(b.center) + b.radius > s.support_radius) return false;
  return true;
}

struct WorkerOutcome {
  TestFieldSpec best;
  double ratio = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  std::size_t evaluations = 0;
};

inline WorkerOutcome search_worker(const ElasticParameter& p, std::uint64_t seed, std::size_t budget,
                                   const SearchOptions& opt) {
  const PolarGrid grid = exploration_grid(opt.support_radius);
  WorkerOutcome out;
  out.seed = seed;
  auto objective = [&](const TestFieldSpec& s) {
    ++out.evaluations;
    if (!admissible(s)) return std::numeric_limits<double>::infinity();
    const FormMoments fm = form_moments(s, grid, Vec3{}, 2);
    const double energy = fm[FormMoments::grad_energy];
    if (!(energy > 0.0)) return std::numeric_limits<double>::infinity();
    return lhs_from_moments(p, fm) / energy;
  };

  std::mt19937_64 rng(seed);
  FieldGenOptions gen;
  gen.gaussian = false;
  gen.max_bumps = opt.max_bumps;
  gen.min_radius = 0.3;
  gen.max_radius = 1.5;
  gen.center_radius = 1.2;
  gen.support_radius = opt.support_radius;
  gen.origin_excluded = true;

  const auto random_budget = static_cast<std::size_t>(opt.random_share * static_cast<double>(budget));
  while (out.evaluations < std::max<std::size_t>(1, random_budget)) {
    const TestFieldSpec s = generate_test_field(rng(), gen);
    const double f = objective(s);
    if (f < out.ratio) {
      out.ratio = f;
      out.best = s;
    }
  }
  if (!std::isfinite(out.ratio)) return out;

  // coordinate descent with per-coordinate step halving
  std::vector<double> x = flatten(out.best);
  std::vector<double> step(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) step[k] = (k % params_per_bump == 3) ? 0.1 : 0.25;
  while (out.evaluations < budget) {
    bool improved = false;
    for (std::size_t k = 0; k < x.size() && out.evaluations < budget; ++k) {
      for (double dir : {1.0, -1.0}) {
        if (out.evaluations >= budget) break;
        std::vector<double> y = x;
        y[k] += dir * step[k];
        const TestFieldSpec cand = unflatten(out.best, y);
        const double f = objective(cand);
        if (f < out.ratio) {
          out.ratio = f;
          out.best = cand;
          x = std::move(y);
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      bool any = false;
      for (auto& s : step) {
        s *= 0.5;
        any = any || s > 1e-6;
      }
      if (!any) break;
    }
  }
  return out;
}

}  // namespace detail

/// Seeded random search plus coordinate descent for a field with negative
/// weighted form. Only fields whose negativity survives the default and the
/// doubled grid are returned.
inline SearchResult counterexample_search(const ElasticParameter& p, const SearchOptions& opt = {}) {
  const std::size_t workers = std::max<std::size_t>(1, opt.workers);
  std::vector<detail::WorkerOutcome> outcomes(workers);
  parallel_for(workers, [&](std::size_t w) {
    const std::size_t share = opt.budget / workers + (w < opt.budget % workers ? 1 : 0);
    const std::uint64_t seed = opt.seed * 1000003ULL + static_cast<std::uint64_t>(w);
    outcomes[w] = detail::search_worker(p, seed, share, opt);
  });

  SearchResult res;
  const detail::WorkerOutcome* best = nullptr;
  for (const auto& o : outcomes) {
    res.evaluations += o.evaluations;
    if (!best || o.ratio < best->ratio || (o.ratio == best->ratio && o.seed < best->seed)) best = &o;
  }
  if (!best || !std::isfinite(best->ratio)) return res;
  res.best = best->best;
  res.best_ratio = best->ratio;
  res.best_worker_seed = best->seed;
  if (best->ratio < 0.0) {
    const PolarGrid def = PolarGrid::default_grid();
    res.best_lhs_default = lhs_form(p, res.best, def);
    res.best_lhs_refined = lhs_form(p, res.best, def.refined());
    if (res.best_lhs_default < opt.threshold && res.best_lhs_refined < opt.threshold) res.field = res.best;
  }
  return res;
}

}  // namespace lamelab
