#pragma once

// Geometry of the uniform-sphere kernel W(x) = 3 / (4 pi R^3) for |x| <= R.
//
// Exact overlaps are built from the volume of the unit ball cut by an octant
// {x >= a, y >= b, z >= c} (a, b, c >= 0). Integrating the disk-quadrant area
// along z gives the closed form
//
//   F(a, b, c) = Psi(a, b) - P(c) + Q(a, c) + Q(b, c) - a b c,
//
// valid when a^2 + b^2 + c^2 < 1 (F = 0 otherwise). Any axis-aligned box is
// mirrored into the positive octant and assembled from F by inclusion-exclusion.
// Psi, Q and P each depend on at most two coordinates, which lets the grid
// stencil below tabulate them once per kernel instead of once per voxel corner.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "multifield/error.hpp"
#include "multifield/snapshot.hpp"

namespace multifield {

inline constexpr double unit_ball_volume = 4.0 * std::numbers::pi / 3.0;

namespace geometry {

// z - z^3/3 times pi/4: volume of the quarter of the slab 0 <= Z <= z.
inline double octant_p(double c) { return 0.25 * std::numbers::pi * (c - c * c * c / 3.0); }

// Requires a^2 + c^2 < 1.
inline double octant_q(double a, double c) {
  const double s = std::sqrt(std::max(0.0, 1.0 - a * a - c * c));
  return 0.5 * (c - c * c * c / 3.0) * std::atan2(a, s) + a * c * s / 3.0 +
         a * (3.0 - a * a) / 6.0 * std::atan2(c, s) - std::atan2(a * c, s) / 3.0;
}

// Requires a^2 + b^2 < 1.
inline double octant_psi(double a, double b) {
  const double zm = std::sqrt(std::max(0.0, 1.0 - a * a - b * b));
  const double azimuth = (a == 0.0 && b == 0.0)
                             ? 0.5 * std::numbers::pi
                             : std::atan2(a * zm, b) + std::atan2(b * zm, a);
  return a * b * zm / 3.0 - a * (3.0 - a * a) / 6.0 * std::atan2(zm, b) -
         b * (3.0 - b * b) / 6.0 * std::atan2(zm, a) + azimuth / 3.0;
}

// Volume of {|x| <= 1, x >= a, y >= b, z >= c} for a, b, c >= 0.
inline double ball_octant_volume(double a, double b, double c) {
  if (a * a + b * b + c * c >= 1.0) return 0.0;
  return octant_psi(a, b) - octant_p(c) + octant_q(a, c) + octant_q(b, c) - a * b * c;
}

// Area of {|x| <= 1, x >= a, y >= b} for a, b >= 0.
inline double disk_quadrant_area(double a, double b) {
  if (a * a + b * b >= 1.0) return 0.0;
  const double sa = std::sqrt(1.0 - a * a);
  const double sb = std::sqrt(1.0 - b * b);
  return 0.5 * (std::atan2(sb, b) - std::atan2(a, sa)) - 0.5 * (b * sb + a * sa) + a * b;
}

// Mirror images of an interval [lo, hi] into [0, inf): one piece if it lies on
// one side of zero, two pieces [0, -lo] and [0, hi] if it straddles zero.
struct FoldedInterval {
  std::array<std::array<double, 2>, 2> pieces{};
  int count = 0;
};

inline FoldedInterval fold(double lo, double hi) {
  FoldedInterval f;
  if (lo >= 0.0) {
    f.pieces[0] = {lo, hi};
    f.count = 1;
  } else if (hi <= 0.0) {
    f.pieces[0] = {-hi, -lo};
    f.count = 1;
  } else {
    f.pieces[0] = {0.0, -lo};
    f.pieces[1] = {0.0, hi};
    f.count = 2;
  }
  return f;
}

// Volume of the unit ball (centred at the origin) inside [lo, hi].
inline double ball_box_volume(const Vec3& lo, const Vec3& hi) {
  const auto fx = fold(lo[0], hi[0]);
  const auto fy = fold(lo[1], hi[1]);
  const auto fz = fold(lo[2], hi[2]);
  double total = 0.0;
  for (int i = 0; i < fx.count; ++i) {
    for (int j = 0; j < fy.count; ++j) {
      for (int k = 0; k < fz.count; ++k) {
        const auto& x = fx.pieces[i];
        const auto& y = fy.pieces[j];
        const auto& z = fz.pieces[k];
        double v = 0.0;
        for (int cx = 0; cx < 2; ++cx) {
          for (int cy = 0; cy < 2; ++cy) {
            for (int cz = 0; cz < 2; ++cz) {
              const double sign = ((cx + cy + cz) % 2 == 0) ? 1.0 : -1.0;
              v += sign * ball_octant_volume(x[cx], y[cy], z[cz]);
            }
          }
        }
        total += v;
      }
    }
  }
  return total;
}

// Area of the unit disk (centred at the origin) inside [lo, hi].
inline double disk_rect_area(const std::array<double, 2>& lo, const std::array<double, 2>& hi) {
  const auto fx = fold(lo[0], hi[0]);
  const auto fy = fold(lo[1], hi[1]);
  double total = 0.0;
  for (int i = 0; i < fx.count; ++i) {
    for (int j = 0; j < fy.count; ++j) {
      const auto& x = fx.pieces[i];
      const auto& y = fy.pieces[j];
      total += disk_quadrant_area(x[0], y[0]) - disk_quadrant_area(x[1], y[0]) -
               disk_quadrant_area(x[0], y[1]) + disk_quadrant_area(x[1], y[1]);
    }
  }
  return total;
}

}  // namespace geometry

struct Kernel3D {
  Vec3 center{};
  double radius = 0.0;
};

// Fraction of the kernel's unit weight that falls in the cube
// [voxel_min, voxel_min + voxel_edge). A zero radius is a point mass and lands
// in exactly one half-open voxel.
inline double sphere_voxel_overlap(const Kernel3D& kernel, const Vec3& voxel_min, double voxel_edge) {
  if (!(voxel_edge > 0.0)) fail(ErrorCode::invalid_argument, "voxel_edge must be positive");
  if (!(kernel.radius >= 0.0)) fail(ErrorCode::invalid_argument, "radius must be >= 0");
  if (kernel.radius == 0.0) {
    for (int a = 0; a < 3; ++a) {
      const double x = kernel.center[a];
      if (!(x >= voxel_min[a] && x < voxel_min[a] + voxel_edge)) return 0.0;
    }
    return 1.0;
  }
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) {
    lo[a] = (voxel_min[a] - kernel.center[a]) / kernel.radius;
    hi[a] = (voxel_min[a] + voxel_edge - kernel.center[a]) / kernel.radius;
  }
  const double fraction = geometry::ball_box_volume(lo, hi) / unit_ball_volume;
  return std::clamp(fraction, 0.0, 1.0);
}

// Exact area of a disk intersected with the square [rect_min, rect_min + rect_edge).
inline double circle_rect_area(const std::array<double, 2>& center, double radius,
                               const std::array<double, 2>& rect_min, double rect_edge) {
  if (!(rect_edge > 0.0)) fail(ErrorCode::invalid_argument, "rect_edge must be positive");
  if (!(radius >= 0.0)) fail(ErrorCode::invalid_argument, "radius must be >= 0");
  if (radius == 0.0) return 0.0;
  std::array<double, 2> lo, hi;
  for (int a = 0; a < 2; ++a) {
    lo[a] = (rect_min[a] - center[a]) / radius;
    hi[a] = (rect_min[a] + rect_edge - center[a]) / radius;
  }
  const double area = radius * radius * geometry::disk_rect_area(lo, hi);
  return std::clamp(area, 0.0, std::numbers::pi * radius * radius);
}

// ---------------------------------------------------------------------------
// 2D projected kernel: tracer lattice and weights
// ---------------------------------------------------------------------------

enum class Kernel2DMode { uniform_disk, projected_sphere };

inline std::string_view to_string(Kernel2DMode mode) {
  return mode == Kernel2DMode::uniform_disk ? "uniform_disk" : "projected_sphere";
}

inline Kernel2DMode parse_kernel2d_mode(std::string_view name) {
  if (name == "uniform_disk") return Kernel2DMode::uniform_disk;
  if (name == "projected_sphere") return Kernel2DMode::projected_sphere;
  fail(ErrorCode::invalid_argument, "unknown 2D kernel mode '" + std::string(name) + "'");
}

inline constexpr std::size_t default_tracer_count = 1000;

// Golden-angle sunflower: point j at radius sqrt((j + 0.5) / n) and angle
// j * 2 pi (1 - 1/phi). Each point represents an equal area of the unit disk.
inline std::vector<std::array<double, 2>> tracer_points(std::size_t n = default_tracer_count) {
  if (n < 1) fail(ErrorCode::invalid_argument, "tracer count must be >= 1");
  const double step = 2.0 * std::numbers::pi * (1.0 - 1.0 / std::numbers::phi);
  std::vector<std::array<double, 2>> points(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double r = std::sqrt((static_cast<double>(j) + 0.5) / static_cast<double>(n));
    const double theta = static_cast<double>(j) * step;
    points[j] = {r * std::cos(theta), r * std::sin(theta)};
  }
  return points;
}

// uniform_disk: equal weights. projected_sphere: column depth of a uniform
// sphere, proportional to sqrt(1 - r^2), normalized to unit sum.
inline std::vector<double> tracer_weights(std::size_t n, Kernel2DMode mode) {
  if (n < 1) fail(ErrorCode::invalid_argument, "tracer count must be >= 1");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  if (mode == Kernel2DMode::projected_sphere) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double r2 = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
      w[j] = std::sqrt(1.0 - r2);
      sum += w[j];
    }
    for (auto& x : w) x /= sum;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Sphere-on-grid stencil
// ---------------------------------------------------------------------------

// Enumerates the overlap fraction of one spherical kernel with every voxel of
// a unit-spaced grid (voxel i spans [i, i+1) along each axis). Indices are not
// wrapped; the caller applies periodicity. Scratch tables are reused between
// calls, so one instance per worker thread.
class SphereGridStencil {
 public:
  // visit(ix, iy, iz, fraction) is called for every voxel with a nonzero
  // share (voxels whose overlap is only a set of measure zero may be skipped).
  template <typename Visit>
  void apply(const Vec3& center, double radius, Visit&& visit) {
    apply(center, radius, [](long) { return true; }, visit);
  }

  // Same, restricted to x-columns for which keep_x(ix) is true.
  template <typename KeepX, typename Visit>
  void apply(const Vec3& center, double radius, KeepX&& keep_x, Visit&& visit) {
    if (radius <= 0.0) {
      const auto ix = static_cast<long>(std::floor(center[0]));
      if (keep_x(ix)) {
        visit(ix, static_cast<long>(std::floor(center[1])), static_cast<long>(std::floor(center[2])), 1.0);
      }
      return;
    }
    for (int a = 0; a < 3; ++a) setup_axis(axes_[a], center[a], radius);
    build_tables();

    const double inside_fraction = 1.0 / (radius * radius * radius) / unit_ball_volume;
    const auto& ax = axes_[0];
    const auto& ay = axes_[1];
    const auto& az = axes_[2];
    for (std::size_t tx = 0; tx < ax.voxels; ++tx) {
      const double minx = ax.min_sq[tx], maxx = ax.max_sq[tx];
      if (minx >= 1.0) continue;
      if (!keep_x(ax.first + static_cast<long>(tx))) continue;
      for (std::size_t ty = 0; ty < ay.voxels; ++ty) {
        const double minxy = minx + ay.min_sq[ty];
        if (minxy >= 1.0) continue;
        const double maxxy = maxx + ay.max_sq[ty];
        for (std::size_t tz = 0; tz < az.voxels; ++tz) {
          if (minxy + az.min_sq[tz] >= 1.0) continue;
          double fraction;
          if (maxxy + az.max_sq[tz] <= 1.0) {
            fraction = inside_fraction;
          } else {
            fraction = boundary_volume(tx, ty, tz) / unit_ball_volume;
            if (fraction <= 0.0) continue;
          }
          visit(ax.first + static_cast<long>(tx), ay.first + static_cast<long>(ty),
                az.first + static_cast<long>(tz), fraction);
        }
      }
    }
  }

 private:
  struct Axis {
    long first = 0;            // unwrapped index of the first voxel touched
    std::size_t voxels = 0;
    std::vector<double> ext;   // ext[0] = 0, ext[1 + t] = |node t| in kernel units
    std::vector<double> ext_sq;
    std::vector<double> min_sq, max_sq;
    // Folded pieces per voxel as (lower, upper) indices into ext.
    std::vector<std::array<std::uint32_t, 4>> pieces;
    std::vector<std::uint8_t> piece_count;
  };

  void setup_axis(Axis& axis, double c, double radius) {
    const double lo = std::floor(c - radius);
    const double hi = std::floor(c + radius);
    axis.first = static_cast<long>(lo);
    axis.voxels = static_cast<std::size_t>(hi - lo) + 1;
    const std::size_t nodes = axis.voxels + 1;
    axis.ext.resize(nodes + 1);
    axis.ext_sq.resize(nodes + 1);
    axis.ext[0] = 0.0;
    axis.ext_sq[0] = 0.0;
    auto& signed_nodes = nodes_;
    signed_nodes.resize(nodes);
    for (std::size_t t = 0; t < nodes; ++t) {
      const double u = (lo + static_cast<double>(t) - c) / radius;
      signed_nodes[t] = u;
      axis.ext[1 + t] = std::fabs(u);
      axis.ext_sq[1 + t] = u * u;
    }
    axis.min_sq.resize(axis.voxels);
    axis.max_sq.resize(axis.voxels);
    axis.pieces.resize(axis.voxels);
    axis.piece_count.resize(axis.voxels);
    for (std::size_t t = 0; t < axis.voxels; ++t) {
      const double u0 = signed_nodes[t], u1 = signed_nodes[t + 1];
      const auto i0 = static_cast<std::uint32_t>(1 + t), i1 = static_cast<std::uint32_t>(2 + t);
      axis.max_sq[t] = std::max(u0 * u0, u1 * u1);
      if (u0 >= 0.0) {
        axis.min_sq[t] = u0 * u0;
        axis.pieces[t] = {i0, i1, 0, 0};
        axis.piece_count[t] = 1;
      } else if (u1 <= 0.0) {
        axis.min_sq[t] = u1 * u1;
        axis.pieces[t] = {i1, i0, 0, 0};
        axis.piece_count[t] = 1;
      } else {
        axis.min_sq[t] = 0.0;
        axis.pieces[t] = {0, i0, 0, i1};
        axis.piece_count[t] = 2;
      }
    }
  }

  void build_tables() {
    const auto& ax = axes_[0];
    const auto& ay = axes_[1];
    const auto& az = axes_[2];
    nx_ = ax.ext.size();
    ny_ = ay.ext.size();
    nz_ = az.ext.size();
    psi_.resize(nx_ * ny_);
    qxz_.resize(nx_ * nz_);
    qyz_.resize(ny_ * nz_);
    p_.resize(nz_);
    for (std::size_t i = 0; i < nx_; ++i) {
      for (std::size_t j = 0; j < ny_; ++j) {
        psi_[i * ny_ + j] = ax.ext_sq[i] + ay.ext_sq[j] < 1.0
                                ? geometry::octant_psi(ax.ext[i], ay.ext[j])
                                : 0.0;
      }
      for (std::size_t k = 0; k < nz_; ++k) {
        qxz_[i * nz_ + k] = ax.ext_sq[i] + az.ext_sq[k] < 1.0
                                ? geometry::octant_q(ax.ext[i], az.ext[k])
                                : 0.0;
      }
    }
    for (std::size_t j = 0; j < ny_; ++j) {
      for (std::size_t k = 0; k < nz_; ++k) {
        qyz_[j * nz_ + k] = ay.ext_sq[j] + az.ext_sq[k] < 1.0
                                ? geometry::octant_q(ay.ext[j], az.ext[k])
                                : 0.0;
      }
    }
    for (std::size_t k = 0; k < nz_; ++k) p_[k] = geometry::octant_p(az.ext[k]);
  }

  double octant(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    const auto& ax = axes_[0];
    const auto& ay = axes_[1];
    const auto& az = axes_[2];
    if (ax.ext_sq[i] + ay.ext_sq[j] + az.ext_sq[k] >= 1.0) return 0.0;
    return psi_[i * ny_ + j] - p_[k] + qxz_[i * nz_ + k] + qyz_[j * nz_ + k] -
           ax.ext[i] * ay.ext[j] * az.ext[k];
  }

  double boundary_volume(std::size_t tx, std::size_t ty, std::size_t tz) const {
    const auto& ax = axes_[0];
    const auto& ay = axes_[1];
    const auto& az = axes_[2];
    double total = 0.0;
    for (int pi = 0; pi < ax.piece_count[tx]; ++pi) {
      const auto x0 = ax.pieces[tx][2 * pi], x1 = ax.pieces[tx][2 * pi + 1];
      for (int pj = 0; pj < ay.piece_count[ty]; ++pj) {
        const auto y0 = ay.pieces[ty][2 * pj], y1 = ay.pieces[ty][2 * pj + 1];
        for (int pk = 0; pk < az.piece_count[tz]; ++pk) {
          const auto z0 = az.pieces[tz][2 * pk], z1 = az.pieces[tz][2 * pk + 1];
          total += octant(x0, y0, z0) - octant(x1, y0, z0) - octant(x0, y1, z0) -
                   octant(x0, y0, z1) + octant(x1, y1, z0) + octant(x1, y0, z1) +
                   octant(x0, y1, z1) - octant(x1, y1, z1);
        }
      }
    }
    return total;
  }

  std::array<Axis, 3> axes_;
  std::size_t nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<double> psi_, qxz_, qyz_, p_;
  std::vector<double> nodes_;
};

}  // namespace multifield
