#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "lamelab/errors.hpp"
#include "lamelab/linalg.hpp"
#include "lamelab/parallel.hpp"

namespace lamelab {

using Field = std::vector<double>;

/// Inner product summed in fixed blocks, then pairwise over block sums.
/// Independent of the number of worker threads.
inline double dot(const Field& a, const Field& b) {
  constexpr std::size_t block = 8192;
  const std::size_t nb = (a.size() + block - 1) / block;
  std::vector<double> partial(nb);
  parallel_for(nb, [&](std::size_t k) {
    const std::size_t lo = k * block, hi = std::min(a.size(), lo + block);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    partial[k] = s;
  });
  return pairwise_sum(partial);
}

inline double norm(const Field& a) { return std::sqrt(dot(a, a)); }

/// Symmetric 7-point operator on a box of nodes:
///   (A x)_p = diag_p x_p - sum_d [ w_d(p) x_{p+e_d} + w_d(p-e_d) x_{p-e_d} ].
/// w_d(p) is the weight of the edge p -- p+e_d. Nodes with diag == 0 are not
/// unknowns; every edge touching one must have zero weight.
class StencilOperator {
 public:
  StencilOperator() = default;
  explicit StencilOperator(std::array<std::size_t, 3> dims)
      : dims_(dims), diag_(size(), 0.0), w_{Field(size(), 0.0), Field(size(), 0.0), Field(size(), 0.0)} {}

  const std::array<std::size_t, 3>& dims() const { return dims_; }
  std::size_t size() const { return dims_[0] * dims_[1] * dims_[2]; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + dims_[0] * (j + dims_[1] * k); }
  std::size_t stride(std::size_t d) const { return d == 0 ? 1 : (d == 1 ? dims_[0] : dims_[0] * dims_[1]); }

  Field& diag() { return diag_; }
  const Field& diag() const { return diag_; }
  Field& weight(std::size_t d) { return w_[d]; }
  const Field& weight(std::size_t d) const { return w_[d]; }
  bool active(std::size_t p) const { return diag_[p] > 0.0; }
  std::size_t active_count() const {
    std::size_t n = 0;
    for (double d : diag_) n += d > 0.0;
    return n;
  }

  /// Sum of the neighbour terms at p.
  double neighbours(const Field& x, std::size_t i, std::size_t j, std::size_t k, std::size_t p) const {
    const std::size_t c[3] = {i, j, k};
    double s = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
      const std::size_t st = stride(d);
      if (c[d] + 1 < dims_[d]) s += w_[d][p] * x[p + st];
      if (c[d] > 0) s += w_[d][p - st] * x[p - st];
    }
    return s;
  }

  void apply(const Field& x, Field& y) const {
    y.resize(size());
    parallel_for(dims_[2], [&](std::size_t k) {
      for (std::size_t j = 0; j < dims_[1]; ++j)
        for (std::size_t i = 0; i < dims_[0]; ++i) {
          const std::size_t p = index(i, j, k);
          y[p] = diag_[p] > 0.0 ? diag_[p] * x[p] - neighbours(x, i, j, k, p) : 0.0;
        }
    });
  }

  /// One red-black Gauss-Seidel sweep; `reverse` runs black before red.
  void gauss_seidel(const Field& b, Field& x, bool reverse) const {
    for (int pass = 0; pass < 2; ++pass) {
      const std::size_t color = static_cast<std::size_t>(reverse ? 1 - pass : pass);
      parallel_for(dims_[2], [&](std::size_t k) {
        for (std::size_t j = 0; j < dims_[1]; ++j) {
          const std::size_t i0 = (color + j + k) % 2;
          for (std::size_t i = i0; i < dims_[0]; i += 2) {
            const std::size_t p = index(i, j, k);
            if (diag_[p] > 0.0) x[p] = (b[p] + neighbours(x, i, j, k, p)) / diag_[p];
          }
        }
      });
    }
  }

  /// Galerkin product P^T A P for piecewise-constant prolongation over 2x2x2 blocks.
  StencilOperator coarsened() const {
    const std::array<std::size_t, 3> cd{(dims_[0] + 1) / 2, (dims_[1] + 1) / 2, (dims_[2] + 1) / 2};
    StencilOperator c(cd);
    for (std::size_t k = 0; k < dims_[2]; ++k)
      for (std::size_t j = 0; j < dims_[1]; ++j)
        for (std::size_t i = 0; i < dims_[0]; ++i) {
          const std::size_t p = index(i, j, k);
          const std::size_t cc[3] = {i / 2, j / 2, k / 2};
          const std::size_t q = c.index(cc[0], cc[1], cc[2]);
          c.diag_[q] += diag_[p];
          const std::size_t fc[3] = {i, j, k};
          for (std::size_t d = 0; d < 3; ++d) {
            const double w = w_[d][p];
            if (w == 0.0 || fc[d] + 1 >= dims_[d]) continue;
            if (fc[d] % 2 == 0)
              c.diag_[q] -= 2.0 * w;  // edge inside the block
            else
              c.w_[d][q] += w;
          }
        }
    // round-off can leave a tiny positive diag on blocks without active nodes
    for (std::size_t q = 0; q < c.size(); ++q)
      if (c.diag_[q] <= 0.0) c.diag_[q] = 0.0;
    return c;
  }

 private:
  std::array<std::size_t, 3> dims_{0, 0, 0};
  Field diag_;
  std::array<Field, 3> w_;
};

/// Dense Cholesky factor of the operator restricted to its active nodes.
class DenseSolver {
 public:
  explicit DenseSolver(const StencilOperator& a) {
    for (std::size_t p = 0; p < a.size(); ++p)
      if (a.active(p)) nodes_.push_back(p);
    const std::size_t n = nodes_.size();
    std::vector<std::size_t> slot(a.size(), n);
    for (std::size_t s = 0; s < n; ++s) slot[nodes_[s]] = s;
    l_.assign(n * n, 0.0);
    const auto& dims = a.dims();
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t p = nodes_[s];
      l_[s * n + s] = a.diag()[p];
      const std::size_t c[3] = {p % dims[0], (p / dims[0]) % dims[1], p / (dims[0] * dims[1])};
      for (std::size_t d = 0; d < 3; ++d) {
        if (c[d] + 1 >= dims[d]) continue;
        const std::size_t q = p + a.stride(d);
        const double w = a.weight(d)[p];
        if (w == 0.0 || slot[q] == n) continue;
        l_[s * n + slot[q]] -= w;
        l_[slot[q] * n + s] -= w;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      double d = l_[j * n + j];
      for (std::size_t k = 0; k < j; ++k) d -= l_[j * n + k] * l_[j * n + k];
      if (!(d > 0.0)) throw NoConvergence("coarse operator is not positive definite");
      d = std::sqrt(d);
      l_[j * n + j] = d;
      for (std::size_t i = j + 1; i < n; ++i) {
        double v = l_[i * n + j];
        for (std::size_t k = 0; k < j; ++k) v -= l_[i * n + k] * l_[j * n + k];
        l_[i * n + j] = v / d;
      }
    }
  }

  void solve(const Field& b, Field& x) const {
    const std::size_t n = nodes_.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = b[nodes_[i]];
      for (std::size_t k = 0; k < i; ++k) v -= l_[i * n + k] * y[k];
      y[i] = v / l_[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
      double v = y[i];
      for (std::size_t k = i + 1; k < n; ++k) v -= l_[k * n + i] * y[k];
      y[i] = v / l_[i * n + i];
    }
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) x[nodes_[i]] = y[i];
  }

 private:
  std::vector<std::size_t> nodes_;
  std::vector<double> l_;
};

struct MultigridOptions {
  std::size_t smoothing_sweeps = 2;
  /// Stop coarsening once a level has at most this many active nodes.
  std::size_t coarse_size = 600;
  /// Piecewise-constant aggregation makes the Galerkin coarse operator too
  /// stiff; the coarse correction is scaled up to compensate.
  double coarse_scale = 1.6;
};

/// Symmetric V-cycle used as a CG preconditioner.
class Multigrid {
 public:
  explicit Multigrid(StencilOperator fine, MultigridOptions opt = {}) : opt_(opt) {
    levels_.push_back(std::move(fine));
    while (levels_.back().active_count() > opt_.coarse_size) {
      const auto& d = levels_.back().dims();
      if (d[0] <= 2 && d[1] <= 2 && d[2] <= 2) break;
      levels_.push_back(levels_.back().coarsened());
    }
    coarse_ = std::make_unique<DenseSolver>(levels_.back());
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      rhs_.emplace_back(levels_[l].size(), 0.0);
      sol_.emplace_back(levels_[l].size(), 0.0);
      res_.emplace_back(levels_[l].size(), 0.0);
    }
  }

  const StencilOperator& fine() const { return levels_.front(); }
  std::size_t level_count() const { return levels_.size(); }

  /// z = B r for one V-cycle B starting from zero.
  void apply(const Field& r, Field& z) {
    rhs_[0] = r;
    cycle(0);
    z = sol_[0];
  }

 private:
  void cycle(std::size_t l) {
    Field& x = sol_[l];
    const Field& b = rhs_[l];
    const StencilOperator& a = levels_[l];
    if (l + 1 == levels_.size()) {
      coarse_->solve(b, x);
      return;
    }
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t s = 0; s < opt_.smoothing_sweeps; ++s) a.gauss_seidel(b, x, false);

    Field& r = res_[l];
    a.apply(x, r);
    for (std::size_t p = 0; p < r.size(); ++p) r[p] = b[p] - r[p];

    const StencilOperator& c = levels_[l + 1];
    Field& bc = rhs_[l + 1];
    std::fill(bc.begin(), bc.end(), 0.0);
    const auto& d = a.dims();
    for (std::size_t k = 0; k < d[2]; ++k)
      for (std::size_t j = 0; j < d[1]; ++j)
        for (std::size_t i = 0; i < d[0]; ++i) {
          const std::size_t p = a.index(i, j, k);
          if (a.active(p)) bc[c.index(i / 2, j / 2, k / 2)] += r[p];
        }
    cycle(l + 1);
    const Field& xc = sol_[l + 1];
    for (std::size_t k = 0; k < d[2]; ++k)
      for (std::size_t j = 0; j < d[1]; ++j)
        for (std::size_t i = 0; i < d[0]; ++i) {
          const std::size_t p = a.index(i, j, k);
          if (a.active(p)) x[p] += opt_.coarse_scale * xc[c.index(i / 2, j / 2, k / 2)];
        }
    for (std::size_t s = 0; s < opt_.smoothing_sweeps; ++s) a.gauss_seidel(b, x, true);
  }

  MultigridOptions opt_;
  std::vector<StencilOperator> levels_;
  std::unique_ptr<DenseSolver> coarse_;
  std::vector<Field> rhs_, sol_, res_;
};

struct SolveStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Preconditioned conjugate gradients for A x = b, stopping on ||r|| <= tol ||b||.
/// `apply_a(x, y)` computes y = A x; `apply_m(r, z)` computes z = M^-1 r.
template <class ApplyA, class ApplyM>
SolveStats pcg(ApplyA&& apply_a, ApplyM&& apply_m, const Field& b, Field& x, double tol, std::size_t max_iter) {
  SolveStats st;
  const double bnorm = norm(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    st.converged = true;
    return st;
  }
  Field r(b.size()), z(b.size()), q(b.size());
  apply_a(x, q);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - q[i];
  st.relative_residual = norm(r) / bnorm;
  if (st.relative_residual <= tol) {
    st.converged = true;
    return st;
  }
  apply_m(r, z);
  Field d = z;
  double rz = dot(r, z);
  while (st.iterations < max_iter) {
    apply_a(d, q);
    const double dq = dot(d, q);
    if (!(dq > 0.0)) break;
    const double step = rz / dq;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += step * d[i];
      r[i] -= step * q[i];
    }
    ++st.iterations;
    st.relative_residual = norm(r) / bnorm;
    if (st.relative_residual <= tol) {
      st.converged = true;
      break;
    }
    apply_m(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = z[i] + beta * d[i];
  }
  return st;
}

}  // namespace lamelab
