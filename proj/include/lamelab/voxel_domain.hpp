#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lamelab/errors.hpp"
#include "lamelab/linalg.hpp"

namespace lamelab {

/// Uniform voxel grid. `origin` is the lower corner; voxel (i, j, k) has its
/// center at origin + (i + 1/2, j + 1/2, k + 1/2) h. Linear index is x-fastest.
struct VoxelGrid {
  std::array<std::size_t, 3> dims{0, 0, 0};
  double h = 1.0;
  Vec3 origin;

  std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + dims[0] * (j + dims[1] * k); }
  std::array<std::size_t, 3> coords(std::size_t p) const {
    return {p % dims[0], (p / dims[0]) % dims[1], p / (dims[0] * dims[1])};
  }
  Vec3 center(std::size_t i, std::size_t j, std::size_t k) const {
    return origin + Vec3{(static_cast<double>(i) + 0.5) * h, (static_cast<double>(j) + 0.5) * h,
                         (static_cast<double>(k) + 0.5) * h};
  }
  Vec3 center(std::size_t p) const {
    const auto c = coords(p);
    return center(c[0], c[1], c[2]);
  }
  /// Voxel containing x, if any.
  std::optional<std::size_t> locate(const Vec3& x) const {
    std::array<std::size_t, 3> c{};
    for (std::size_t d = 0; d < 3; ++d) {
      const double t = std::floor((x[d] - origin[d]) / h);
      if (t < 0.0 || t >= static_cast<double>(dims[d])) return std::nullopt;
      c[d] = static_cast<std::size_t>(t);
    }
    return index(c[0], c[1], c[2]);
  }
  Vec3 upper() const {
    return origin + Vec3{h * static_cast<double>(dims[0]), h * static_cast<double>(dims[1]),
                         h * static_cast<double>(dims[2])};
  }

  /// Cube of side `side` centered at `mid` with n voxels per edge.
  static VoxelGrid cube(const Vec3& mid, double side, std::size_t n) {
    VoxelGrid g;
    g.dims = {n, n, n};
    g.h = side / static_cast<double>(n);
    g.origin = mid - Vec3{0.5 * side, 0.5 * side, 0.5 * side};
    return g;
  }
};

/// Voxelized open set. Points outside the grid count as open, so a domain
/// file only has to describe the region it is probed in.
struct VoxelDomain {
  VoxelGrid grid;
  std::vector<std::uint8_t> open_mask;  // 1 = inside the open set

  bool open_at(std::size_t p) const { return open_mask[p] != 0; }
  bool open(const Vec3& x) const {
    const auto p = grid.locate(x);
    return !p || open_mask[*p] != 0;
  }
  std::size_t open_count() const {
    std::size_t n = 0;
    for (auto b : open_mask) n += b;
    return n;
  }
  /// The origin lies on the boundary: among the 8 voxels sharing the origin
  /// as a corner (or the one containing it), some are open and some are not.
  bool origin_on_boundary() const {
    bool any_open = false, any_closed = false;
    const double e = 0.5 * grid.h;
    for (double sx : {-e, e})
      for (double sy : {-e, e})
        for (double sz : {-e, e}) {
          const auto p = grid.locate(Vec3{sx, sy, sz});
          if (!p) continue;
          (open_mask[*p] ? any_open : any_closed) = true;
        }
    return any_open && any_closed;
  }
};

/// A compact set given by member voxels.
struct VoxelSet {
  VoxelGrid grid;
  std::vector<std::uint8_t> member;

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : member) n += b;
    return n;
  }
  bool empty() const { return count() == 0; }
  Vec3 centroid() const {
    Vec3 s;
    std::size_t n = 0;
    for (std::size_t p = 0; p < member.size(); ++p)
      if (member[p]) {
        s += grid.center(p);
        ++n;
      }
    return n ? s * (1.0 / static_cast<double>(n)) : s;
  }
  /// Largest extent of the member centers over a spiral of directions plus
  /// the coordinate axes. Never exceeds the true diameter; exact for balls.
  double diameter() const {
    std::vector<Vec3> dirs{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
    constexpr int n = 256;
    const double golden = pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - (i + 0.5) / n;  // upper hemisphere suffices
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      dirs.push_back(Vec3{r * std::cos(golden * i), r * std::sin(golden * i), z});
    }
    std::vector<double> lo(dirs.size(), 1e300), hi(dirs.size(), -1e300);
    bool any = false;
    for (std::size_t p = 0; p < member.size(); ++p) {
      if (!member[p]) continue;
      const Vec3 c = grid.center(p);
      for (std::size_t d = 0; d < dirs.size(); ++d) {
        const double t = dot(c, dirs[d]);
        lo[d] = std::min(lo[d], t);
        hi[d] = std::max(hi[d], t);
      }
      any = true;
    }
    if (!any) return 0.0;
    double w = 0.0;
    for (std::size_t d = 0; d < dirs.size(); ++d) w = std::max(w, hi[d] - lo[d]);
    return w;
  }
  bool touches_boundary() const {
    for (std::size_t p = 0; p < member.size(); ++p) {
      if (!member[p]) continue;
      const auto c = grid.coords(p);
      for (std::size_t d = 0; d < 3; ++d)
        if (c[d] == 0 || c[d] + 1 == grid.dims[d]) return true;
    }
    return false;
  }
};

/// Voxel set of grid cells whose centers satisfy pred.
template <class Pred>
VoxelSet rasterize_set(const VoxelGrid& g, Pred&& pred) {
  VoxelSet s{g, std::vector<std::uint8_t>(g.size(), 0)};
  for (std::size_t p = 0; p < g.size(); ++p) s.member[p] = pred(g.center(p)) ? 1 : 0;
  return s;
}

/// Closed ball of radius rho about c, voxelized on g.
inline VoxelSet ball_set(const VoxelGrid& g, double rho, const Vec3& c = {}) {
  return rasterize_set(g, [&](const Vec3& x) { return norm(x - c) <= rho; });
}

// ---------------------------------------------------------------------------
// Analytic fixture shapes. Each exposes open(x), the indicator of the open set.

/// Omega = {x_1 > 0}; the complement is the closed half-space {x_1 <= 0}.
struct HalfSpaceComplement {
  bool open(const Vec3& x) const { return x[0] > 0.0; }
};

/// Omega = complement of the closed solid cone with vertex 0, axis -e_1 and the given half-angle.
struct ConeComplement {
  double half_angle = pi / 3.0;
  bool open(const Vec3& x) const {
    const double r = norm(x);
    if (r == 0.0) return false;
    return -x[0] < r * std::cos(half_angle);
  }
};

/// Omega = R^3 minus the origin. No voxel center is the origin, so every voxel is open.
struct PointComplement {
  bool open(const Vec3& x) const { return !(x == Vec3{}); }
};

template <class Shape>
VoxelDomain rasterize(const Shape& shape, const VoxelGrid& g) {
  VoxelDomain d{g, std::vector<std::uint8_t>(g.size(), 0)};
  for (std::size_t p = 0; p < g.size(); ++p) d.open_mask[p] = shape.open(g.center(p)) ? 1 : 0;
  return d;
}

/// Standard fixture grid: [-1, 1]^3 with n voxels per edge.
inline VoxelGrid fixture_grid(std::size_t n = 128) { return VoxelGrid::cube(Vec3{}, 2.0, n); }

// ---------------------------------------------------------------------------
// "voxdom v1" text format

namespace detail {
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_voxdom(std::ostream& os, const VoxelDomain& d) {
  const auto& g = d.grid;
  os << "voxdom v1\n";
  os << "dims " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n';
  os << "spacing " << detail::format_double(g.h) << '\n';
  os << "origin " << detail::format_double(g.origin[0]) << ' ' << detail::format_double(g.origin[1]) << ' '
     << detail::format_double(g.origin[2]) << '\n';
  std::string row(g.dims[0], '0');
  for (std::size_t k = 0; k < g.dims[2]; ++k)
    for (std::size_t j = 0; j < g.dims[1]; ++j) {
      for (std::size_t i = 0; i < g.dims[0]; ++i) row[i] = d.open_mask[g.index(i, j, k)] ? '1' : '0';
      os << row << '\n';
    }
}

inline VoxelDomain read_voxdom(std::istream& is) {
  auto next_line = [&](const char* what) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError(std::string("voxdom: missing ") + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line("header") != "voxdom v1") throw ParseError("voxdom: header must be 'voxdom v1'");

  VoxelDomain d;
  {
    std::istringstream ls(next_line("dims"));
    std::string key;
    long long n[3];
    if (!(ls >> key >> n[0] >> n[1] >> n[2]) || key != "dims") throw ParseError("voxdom: bad dims line");
    for (int a = 0; a < 3; ++a) {
      if (n[a] <= 0) throw ParseError("voxdom: dims must be positive");
      d.grid.dims[a] = static_cast<std::size_t>(n[a]);
    }
    if (ls >> key) throw ParseError("voxdom: trailing data on dims line");
  }
  {
    std::istringstream ls(next_line("spacing"));
    std::string key;
    if (!(ls >> key >> d.grid.h) || key != "spacing" || !(d.grid.h > 0.0) || !std::isfinite(d.grid.h))
      throw ParseError("voxdom: bad spacing line");
  }
  {
    std::istringstream ls(next_line("origin"));
    std::string key;
    if (!(ls >> key >> d.grid.origin[0] >> d.grid.origin[1] >> d.grid.origin[2]) || key != "origin")
      throw ParseError("voxdom: bad origin line");
  }
  const auto& g = d.grid;
  d.open_mask.assign(g.size(), 0);
  for (std::size_t row = 0; row < g.dims[1] * g.dims[2]; ++row) {
    const std::string line = next_line("mask row");
    if (line.size() != g.dims[0])
      throw ParseError("voxdom: mask row " + std::to_string(row) + " has length " + std::to_string(line.size()));
    for (std::size_t i = 0; i < g.dims[0]; ++i) {
      const char c = line[i];
      if (c != '0' && c != '1') throw ParseError("voxdom: mask characters must be '0' or '1'");
      d.open_mask[row * g.dims[0] + i] = c == '1' ? 1 : 0;
    }
  }
  std::string rest;
  while (std::getline(is, rest))
    if (rest.find_first_not_of(" \t\r") != std::string::npos) throw ParseError("voxdom: data after mask");
  return d;
}

}  // namespace lamelab
