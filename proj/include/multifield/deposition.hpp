#pragma once

// Particle-to-grid deposition: 3D grids by exact sphere/voxel overlap, 2D maps
// by slab selection and projected tracers, plus maps cut from 3D grids and
// factor-of-k downsampling.
//
// Parallel schedule: each worker owns a contiguous block of output rows (the
// slowest axis) and walks all particles in index order, adding only into the
// rows it owns. Every cell therefore receives its contributions in the same
// order whatever the worker count, and results are bit-identical.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "multifield/error.hpp"
#include "multifield/fields.hpp"
#include "multifield/grid.hpp"
#include "multifield/kernel_geometry.hpp"
#include "multifield/parallel.hpp"
#include "multifield/periodic_index.hpp"
#include "multifield/snapshot.hpp"

namespace multifield {

// Kernel radius per particle, per species (h^-1 Mpc).
using RadiiMap = std::map<Species, std::vector<double>>;

inline RadiiMap compute_radii(const Snapshot& snap, std::size_t k = default_neighbor_count,
                              unsigned workers = default_workers()) {
  RadiiMap out;
  for (const auto& set : snap.species) {
    out[set.kind] = smoothing_radii(set, snap.header.box_size, k, workers).radii;
  }
  return out;
}

struct DepositOptions {
  unsigned workers = default_workers();
  // Keep the numerator/denominator planes of weighted-mean fields on the
  // output grid (see ScalarGrid).
  bool keep_planes = false;
};

namespace detail {

inline long wrap_index(long i, long n) {
  if (i >= 0 && i < n) return i;
  i %= n;
  return i < 0 ? i + n : i;
}

// Kernel radii for one species: stars and black holes may omit them (their
// kernels are points by definition).
inline std::vector<double> radii_for(const RadiiMap& radii, const ParticleSet& set) {
  const auto it = radii.find(set.kind);
  if (it == radii.end()) {
    if (!uses_adaptive_radius(set.kind) || set.count() == 0) return std::vector<double>(set.count(), 0.0);
    fail(ErrorCode::missing_radii, "no smoothing radii for species " + std::string(species_name(set.kind)));
  }
  if (it->second.size() != set.count()) {
    fail(ErrorCode::missing_radii, "radii for " + std::string(species_name(set.kind)) + " have length " +
                                       std::to_string(it->second.size()) + ", expected " +
                                       std::to_string(set.count()));
  }
  return it->second;
}

// One accumulation plane per distinct (species set, quantity) pair; fields
// that share a plane (Mgas and the weight of T, say) fill it once.
struct PlanePlan {
  struct Source {
    Species kind;
    std::vector<double> values;
  };
  struct Plane {
    std::string key;
    std::vector<Source> sources;
  };
  struct FieldPlanes {
    FieldId field;
    std::size_t numerator;
    std::optional<std::size_t> denominator;
  };
  std::vector<Plane> planes;
  std::vector<FieldPlanes> fields;

  std::size_t plane_for(const std::string& key) {
    for (std::size_t p = 0; p < planes.size(); ++p) {
      if (planes[p].key == key) return p;
    }
    planes.push_back({key, {}});
    return planes.size() - 1;
  }
};

inline std::string species_key(const FieldSpec& spec) {
  std::string key;
  for (auto s : spec.species) {
    key += species_name(s);
    key += ',';
  }
  return key;
}

inline PlanePlan plan_planes(const Snapshot& snap, std::span<const FieldId> fields) {
  PlanePlan plan;
  for (auto id : fields) {
    const FieldSpec& spec = field_spec(id);
    const auto streams = contributions(spec, snap);
    const std::string base = species_key(spec) + "|";
    std::string num_key, den_key;
    switch (spec.mode) {
      case FieldMode::extensive:
      case FieldMode::multi_species_extensive:
        num_key = base + describe(spec.numerator);
        break;
      case FieldMode::mass_weighted:
        num_key = base + "mass*" + describe(spec.numerator);
        den_key = base + "mass";
        break;
      case FieldMode::pair_ratio:
        num_key = base + describe(spec.numerator);
        den_key = base + describe(*spec.denominator);
        break;
    }
    PlanePlan::FieldPlanes fp{id, 0, std::nullopt};
    const bool new_num = std::none_of(plan.planes.begin(), plan.planes.end(),
                                      [&](const auto& p) { return p.key == num_key; });
    fp.numerator = plan.plane_for(num_key);
    if (new_num) {
      for (const auto& s : streams) plan.planes[fp.numerator].sources.push_back({s.kind, s.numerator});
    }
    if (!den_key.empty()) {
      const bool new_den = std::none_of(plan.planes.begin(), plan.planes.end(),
                                        [&](const auto& p) { return p.key == den_key; });
      fp.denominator = plan.plane_for(den_key);
      if (new_den) {
        for (const auto& s : streams) plan.planes[*fp.denominator].sources.push_back({s.kind, s.weight});
      }
    }
    plan.fields.push_back(fp);
  }
  return plan;
}

// Per species: the planes it feeds and the matching per-particle values.
struct SpeciesWork {
  const ParticleSet* set;
  std::vector<double> radii;
  std::vector<std::size_t> planes;
  std::vector<const std::vector<double>*> values;
};

inline std::vector<SpeciesWork> species_work(const Snapshot& snap, const RadiiMap& radii,
                                             const PlanePlan& plan) {
  std::vector<SpeciesWork> work;
  for (const auto& set : snap.species) {
    SpeciesWork w{&set, {}, {}, {}};
    for (std::size_t p = 0; p < plan.planes.size(); ++p) {
      for (const auto& src : plan.planes[p].sources) {
        if (src.kind == set.kind) {
          w.planes.push_back(p);
          w.values.push_back(&src.values);
        }
      }
    }
    if (w.planes.empty() || set.count() == 0) continue;
    w.radii = radii_for(radii, set);
    work.push_back(std::move(w));
  }
  return work;
}

// Turns accumulated planes into output grids: densities divide by the cell
// measure, weighted means divide numerator by weight (0 where the weight is 0).
inline std::vector<ScalarGrid> finish_grids(PlanePlan& plan, std::vector<std::vector<double>>& planes,
                                            int dimensionality, std::size_t n, const Snapshot& snap,
                                            bool keep_planes) {
  std::vector<std::size_t> uses(planes.size(), 0);
  for (const auto& f : plan.fields) {
    ++uses[f.numerator];
    if (f.denominator) ++uses[*f.denominator];
  }
  std::vector<ScalarGrid> out;
  for (const auto& f : plan.fields) {
    ScalarGrid g;
    g.dimensionality = dimensionality;
    g.n = n;
    g.box_size = snap.header.box_size;
    g.redshift = snap.header.redshift;
    g.field = f.field;
    if (!f.denominator) {
      const double inv = 1.0 / g.cell_measure();
      if (--uses[f.numerator] == 0) {
        g.values = std::move(planes[f.numerator]);
      } else {
        g.values = planes[f.numerator];
      }
      for (auto& v : g.values) v *= inv;
    } else {
      const auto& num = planes[f.numerator];
      const auto& den = planes[*f.denominator];
      g.values.resize(num.size());
      for (std::size_t c = 0; c < num.size(); ++c) {
        if (den[c] > 0.0) {
          g.values[c] = num[c] / den[c];
        } else {
          g.values[c] = 0.0;
          ++g.empty_cells;
        }
      }
      if (keep_planes) {
        g.numerator = num;
        g.denominator = den;
      }
      --uses[f.numerator];
      --uses[*f.denominator];
      if (uses[f.numerator] == 0) std::vector<double>().swap(planes[f.numerator]);
      if (uses[*f.denominator] == 0) std::vector<double>().swap(planes[*f.denominator]);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// Rows [begin, end) of a periodic axis of length n; true if the wrapped
// interval [lo, hi] of unwrapped indices touches them.
inline bool touches_rows(long lo, long hi, long n, long begin, long end) {
  if (hi - lo + 1 >= n) return true;
  const long a = wrap_index(lo, n);
  const long b = a + (hi - lo);
  // [a, b] possibly extends past n; test both the direct and wrapped images.
  if (a < end && b >= begin) return true;
  return b >= n && b - n >= begin && a - n < end;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 3D
// ---------------------------------------------------------------------------

// Deposits several fields at once; particles are visited once per species and
// the overlap fractions are shared by every field they feed.
inline std::vector<ScalarGrid> deposit3d_fields(const Snapshot& snap, const RadiiMap& radii,
                                                std::span<const FieldId> fields, std::size_t n,
                                                const DepositOptions& options = {}) {
  if (n < 1) fail(ErrorCode::invalid_argument, "grid size must be >= 1");
  auto plan = detail::plan_planes(snap, fields);
  const auto work = detail::species_work(snap, radii, plan);
  const std::size_t cells = n * n * n;
  std::vector<std::vector<double>> planes(plan.planes.size(), std::vector<double>(cells, 0.0));

  const double box = snap.header.box_size;
  const double scale = static_cast<double>(n) / box;
  const long ln = static_cast<long>(n);

  parallel_for(n, options.workers, [&](std::size_t row_begin, std::size_t row_end) {
    const long x0 = static_cast<long>(row_begin), x1 = static_cast<long>(row_end);
    SphereGridStencil stencil;
    std::vector<double*> targets;
    std::vector<double> amounts;
    for (const auto& w : work) {
      targets.resize(w.planes.size());
      amounts.resize(w.planes.size());
      for (std::size_t p = 0; p < w.planes.size(); ++p) targets[p] = planes[w.planes[p]].data();
      for (std::size_t i = 0; i < w.set->count(); ++i) {
        const Vec3& pos = w.set->positions[i];
        const Vec3 c{pos[0] * scale, pos[1] * scale, pos[2] * scale};
        const double r = w.radii[i] * scale;
        const long lo = static_cast<long>(std::floor(c[0] - r));
        const long hi = static_cast<long>(std::floor(c[0] + r));
        if (!detail::touches_rows(lo, hi, ln, x0, x1)) continue;
        for (std::size_t p = 0; p < w.planes.size(); ++p) amounts[p] = (*w.values[p])[i];
        const std::size_t np = w.planes.size();
        stencil.apply(
            c, r,
            [&](long ix) {
              const long wx = detail::wrap_index(ix, ln);
              return wx >= x0 && wx < x1;
            },
            [&](long ix, long iy, long iz, double f) {
              const auto cell = static_cast<std::size_t>(
                  (detail::wrap_index(ix, ln) * ln + detail::wrap_index(iy, ln)) * ln +
                  detail::wrap_index(iz, ln));
              for (std::size_t p = 0; p < np; ++p) targets[p][cell] += amounts[p] * f;
            });
      }
    }
  });
  return detail::finish_grids(plan, planes, 3, n, snap, options.keep_planes);
}

inline ScalarGrid deposit3d(const Snapshot& snap, const RadiiMap& radii, const FieldSpec& spec, std::size_t n,
                            const DepositOptions& options = {}) {
  const FieldId id = spec.id;
  return std::move(deposit3d_fields(snap, radii, std::span(&id, 1), n, options).front());
}

// ---------------------------------------------------------------------------
// 2D
// ---------------------------------------------------------------------------

struct SlicePlan {
  int axis = 2;  // projection axis: 0 x, 1 y, 2 z
  double offset = 0.0;
  double thickness = 5.0;

  bool operator==(const SlicePlan&) const = default;
};

inline constexpr int default_slices_per_axis = 5;

// Five non-overlapping slabs per axis; XY-plane slabs (projection along z)
// first, then XZ, then YZ.
inline std::vector<SlicePlan> slice_plan_default(double box_size) {
  if (!(box_size > 0.0)) fail(ErrorCode::invalid_argument, "box_size must be positive");
  const double thickness = box_size / default_slices_per_axis;
  std::vector<SlicePlan> plans;
  for (int axis : {2, 1, 0}) {
    for (int k = 0; k < default_slices_per_axis; ++k) plans.push_back({axis, k * thickness, thickness});
  }
  return plans;
}

// In-plane axes for a projection axis, in increasing order; the first is the
// slow (row) axis of the map.
inline std::array<int, 2> plane_axes(int axis) {
  switch (axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    case 2: return {0, 1};
  }
  fail(ErrorCode::invalid_argument, "axis must be 0, 1 or 2");
}

inline bool in_slab(double coordinate, const SlicePlan& plan, double box) {
  double d = coordinate - plan.offset;
  if (d < 0.0) d += box;
  if (d >= box) d -= box;
  return d < plan.thickness;
}

struct Deposit2DOptions {
  std::size_t n = 256;
  Kernel2DMode mode = Kernel2DMode::uniform_disk;
  std::size_t n_tracers = default_tracer_count;
  unsigned workers = default_workers();
  bool keep_planes = false;
};

inline std::vector<ScalarGrid> deposit2d_fields(const Snapshot& snap, const RadiiMap& radii,
                                                std::span<const FieldId> fields, const SlicePlan& plan_in,
                                                const Deposit2DOptions& options = {}) {
  const double box = snap.header.box_size;
  const std::size_t n = options.n;
  if (n < 1) fail(ErrorCode::invalid_argument, "map size must be >= 1");
  if (!(plan_in.thickness > 0.0 && plan_in.thickness <= box)) {
    fail(ErrorCode::invalid_argument, "slab thickness must be in (0, box_size]");
  }
  if (!(plan_in.offset >= 0.0 && plan_in.offset < box)) {
    fail(ErrorCode::invalid_argument, "slab offset must be in [0, box_size)");
  }
  const auto [ua, va] = plane_axes(plan_in.axis);
  auto plan = detail::plan_planes(snap, fields);
  const auto work = detail::species_work(snap, radii, plan);
  const auto tracers = tracer_points(options.n_tracers);
  const auto weights = tracer_weights(options.n_tracers, options.mode);
  std::vector<std::vector<double>> planes(plan.planes.size(), std::vector<double>(n * n, 0.0));

  const double scale = static_cast<double>(n) / box;
  const long ln = static_cast<long>(n);

  parallel_for(n, options.workers, [&](std::size_t row_begin, std::size_t row_end) {
    const long u0 = static_cast<long>(row_begin), u1 = static_cast<long>(row_end);
    std::vector<double> amounts;
    for (const auto& w : work) {
      amounts.resize(w.planes.size());
      for (std::size_t i = 0; i < w.set->count(); ++i) {
        const Vec3& pos = w.set->positions[i];
        if (!in_slab(pos[plan_in.axis], plan_in, box)) continue;
        const double cu = pos[ua] * scale, cv = pos[va] * scale;
        const double r = w.radii[i] * scale;
        if (!detail::touches_rows(static_cast<long>(std::floor(cu - r)), static_cast<long>(std::floor(cu + r)),
                                  ln, u0, u1)) {
          continue;
        }
        for (std::size_t p = 0; p < w.planes.size(); ++p) amounts[p] = (*w.values[p])[i];
        auto drop = [&](double tu, double tv, double weight) {
          const long iu = detail::wrap_index(static_cast<long>(std::floor(tu)), ln);
          if (iu < u0 || iu >= u1) return;
          const long iv = detail::wrap_index(static_cast<long>(std::floor(tv)), ln);
          const auto cell = static_cast<std::size_t>(iu * ln + iv);
          for (std::size_t p = 0; p < w.planes.size(); ++p) planes[w.planes[p]][cell] += amounts[p] * weight;
        };
        if (r <= 0.0) {
          drop(cu, cv, 1.0);
          continue;
        }
        for (std::size_t j = 0; j < tracers.size(); ++j) {
          drop(cu + r * tracers[j][0], cv + r * tracers[j][1], weights[j]);
        }
      }
    }
  });
  auto grids = detail::finish_grids(plan, planes, 2, n, snap, options.keep_planes);
  return grids;
}

inline ScalarGrid deposit2d(const Snapshot& snap, const RadiiMap& radii, const FieldSpec& spec,
                            const SlicePlan& plan, const Deposit2DOptions& options = {}) {
  const FieldId id = spec.id;
  return std::move(deposit2d_fields(snap, radii, std::span(&id, 1), plan, options).front());
}

// ---------------------------------------------------------------------------
// Derived products
// ---------------------------------------------------------------------------

namespace detail {

// Weights for averaging an intensive grid: retained planes, or an explicit
// mass grid of the same shape.
struct WeightSource {
  const std::vector<double>* numerator = nullptr;    // null: use values * weight
  const std::vector<double>* denominator = nullptr;
};

inline WeightSource weight_source(const ScalarGrid& grid, const ScalarGrid* mass_grid) {
  const FieldSpec& spec = field_spec(grid.field);
  if (grid.has_planes()) return {&grid.numerator, &grid.denominator};
  if (spec.mode == FieldMode::pair_ratio) {
    fail(ErrorCode::missing_mass_grid, std::string(spec.prefix) +
                                           " needs its retained numerator/denominator planes");
  }
  if (mass_grid == nullptr) {
    fail(ErrorCode::missing_mass_grid, std::string(spec.prefix) + " is mass-weighted; a mass grid is required");
  }
  if (mass_grid->dimensionality != grid.dimensionality || mass_grid->n != grid.n) {
    fail(ErrorCode::shape_mismatch, "mass grid shape differs from the field grid");
  }
  return {nullptr, &mass_grid->values};
}

}  // namespace detail

// Projects voxel planes [voxel_start, voxel_start + voxel_count) (periodic)
// along `axis` into a map. Densities become surface densities per
// (h^-1 kpc)^2; weighted means are re-averaged along the axis.
inline ScalarGrid extract_map(const ScalarGrid& grid, int axis, std::size_t voxel_start, std::size_t voxel_count,
                              const ScalarGrid* mass_grid = nullptr) {
  if (grid.dimensionality != 3) fail(ErrorCode::invalid_argument, "extract_map needs a 3D grid");
  if (voxel_count < 1) fail(ErrorCode::invalid_argument, "voxel_count must be >= 1");
  const auto [ua, va] = plane_axes(axis);
  const FieldSpec& spec = field_spec(grid.field);
  const std::size_t n = grid.n;
  ScalarGrid out = make_grid(2, n, grid.box_size, grid.redshift, grid.field);
  out.params = grid.params;

  auto index = [&](std::size_t u, std::size_t v, std::size_t d) {
    std::array<std::size_t, 3> ijk{};
    ijk[ua] = u;
    ijk[va] = v;
    ijk[axis] = (voxel_start + d) % n;
    return (ijk[0] * n + ijk[1]) * n + ijk[2];
  };

  if (is_density(spec.mode)) {
    const double depth = grid.cell_edge_kpc();
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) {
        double s = 0.0;
        for (std::size_t d = 0; d < voxel_count; ++d) s += grid.values[index(u, v, d)];
        out.values[u * n + v] = s * depth;
      }
    }
    return out;
  }

  const auto src = detail::weight_source(grid, mass_grid);
  const bool keep = grid.has_planes();
  if (keep) {
    out.numerator.assign(n * n, 0.0);
    out.denominator.assign(n * n, 0.0);
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      double num = 0.0, den = 0.0;
      for (std::size_t d = 0; d < voxel_count; ++d) {
        const auto c = index(u, v, d);
        const double w = (*src.denominator)[c];
        num += src.numerator ? (*src.numerator)[c] : grid.values[c] * w;
        den += w;
      }
      const auto cell = u * n + v;
      if (den > 0.0) {
        out.values[cell] = num / den;
      } else {
        ++out.empty_cells;
      }
      if (keep) {
        out.numerator[cell] = num;
        out.denominator[cell] = den;
      }
    }
  }
  return out;
}

// Coarsens a 3D grid by an integer factor per axis. Densities average their
// children (same units, so totals are preserved); weighted means re-weight.
inline ScalarGrid downsample(const ScalarGrid& grid, std::size_t factor = 2, const ScalarGrid* mass_grid = nullptr) {
  if (grid.dimensionality != 3) fail(ErrorCode::invalid_argument, "downsample needs a 3D grid");
  if (factor < 1) fail(ErrorCode::invalid_argument, "factor must be >= 1");
  if (grid.n % factor != 0) {
    fail(ErrorCode::not_divisible, "grid size " + std::to_string(grid.n) + " is not divisible by " +
                                       std::to_string(factor));
  }
  const FieldSpec& spec = field_spec(grid.field);
  const std::size_t n = grid.n, m = n / factor;
  ScalarGrid out = make_grid(3, m, grid.box_size, grid.redshift, grid.field);
  out.params = grid.params;
  const bool density = is_density(spec.mode);
  detail::WeightSource src;
  if (!density) src = detail::weight_source(grid, mass_grid);
  const bool keep = !density && grid.has_planes();
  if (keep) {
    out.numerator.assign(m * m * m, 0.0);
    out.denominator.assign(m * m * m, 0.0);
  }
  const double children = static_cast<double>(factor * factor * factor);
  for (std::size_t I = 0; I < m; ++I) {
    for (std::size_t J = 0; J < m; ++J) {
      for (std::size_t K = 0; K < m; ++K) {
        double num = 0.0, den = 0.0;
        for (std::size_t a = 0; a < factor; ++a) {
          for (std::size_t b = 0; b < factor; ++b) {
            for (std::size_t c = 0; c < factor; ++c) {
              const auto cell = ((I * factor + a) * n + (J * factor + b)) * n + (K * factor + c);
              if (density) {
                num += grid.values[cell];
              } else {
                const double w = (*src.denominator)[cell];
                num += src.numerator ? (*src.numerator)[cell] : grid.values[cell] * w;
                den += w;
              }
            }
          }
        }
        const auto target = (I * m + J) * m + K;
        if (density) {
          out.values[target] = num / children;
        } else {
          if (den > 0.0) {
            out.values[target] = num / den;
          } else {
            ++out.empty_cells;
          }
          if (keep) {
            out.numerator[target] = num;
            out.denominator[target] = den;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace multifield
