#pragma once

// Exact k-nearest-neighbour queries in a periodic cube, used for the adaptive
// kernel radii (distance to the k-th closest same-species particle).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "multifield/error.hpp"
#include "multifield/parallel.hpp"
#include "multifield/snapshot.hpp"

namespace multifield {

// Minimum-image distance. Every caller (index, radii, tests) must agree on
// this exact floating-point expression for results to be bit-comparable.
inline double periodic_distance(const Vec3& a, const Vec3& b, double box) {
  double sum = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    double d = std::fabs(a[axis] - b[axis]);
    d = std::min(d, box - d);
    sum += d * d;
  }
  return std::sqrt(sum);
}

struct Neighbor {
  std::size_t id;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

// Uniform cell grid over the periodic box. Immutable after construction.
class PeriodicIndex {
 public:
  PeriodicIndex(std::span<const Vec3> points, double box_size)
      : box_(box_size), points_(points.begin(), points.end()) {
    if (!(box_size > 0.0)) fail(ErrorCode::invalid_argument, "box_size must be positive");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      for (int axis = 0; axis < 3; ++axis) {
        const double x = points_[i][axis];
        if (!(x >= 0.0 && x < box_)) {
          fail(ErrorCode::out_of_box, "point " + std::to_string(i) + " coordinate " +
                                          std::to_string(x) + " outside [0, " +
                                          std::to_string(box_) + ")");
        }
      }
    }
    // Roughly two points per cell.
    const auto target = static_cast<double>(points_.size()) / 2.0;
    cells_per_axis_ = std::clamp(static_cast<int>(std::cbrt(target)), 1, 256);
    cell_size_ = box_ / cells_per_axis_;

    const auto n_cells = static_cast<std::size_t>(cells_per_axis_) * cells_per_axis_ * cells_per_axis_;
    cell_start_.assign(n_cells + 1, 0);
    std::vector<std::size_t> cell_of(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      cell_of[i] = cell_index(cell_coord(points_[i][0]), cell_coord(points_[i][1]),
                              cell_coord(points_[i][2]));
      ++cell_start_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < n_cells; ++c) cell_start_[c + 1] += cell_start_[c];
    members_.resize(points_.size());
    std::vector<std::size_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) members_[cursor[cell_of[i]]++] = i;
  }

  std::size_t size() const { return points_.size(); }
  double box_size() const { return box_; }
  const Vec3& point(std::size_t id) const { return points_[id]; }

  // Exactly k neighbours sorted by (distance, id).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k,
                            std::optional<std::size_t> exclude = std::nullopt) const {
    if (k < 1) fail(ErrorCode::invalid_argument, "k must be >= 1");
    std::size_t available = points_.size();
    if (exclude && *exclude < points_.size()) --available;
    if (k > available) {
      fail(ErrorCode::insufficient_points, "requested " + std::to_string(k) + " neighbours but only " +
                                               std::to_string(available) + " points are available");
    }
    std::vector<Neighbor> best;
    best.reserve(k + 1);
    search(query, k, exclude, best);
    std::sort_heap(best.begin(), best.end(), neighbor_less);
    return best;
  }

  std::vector<Neighbor> knn_of_point(std::size_t id, std::size_t k, bool exclude_self = true) const {
    if (id >= points_.size()) fail(ErrorCode::invalid_argument, "point id out of range");
    return knn(points_[id], k, exclude_self ? std::optional<std::size_t>(id) : std::nullopt);
  }

  // Distance to the k-th neighbour only; same result as knn(...).back().distance.
  double kth_distance(const Vec3& query, std::size_t k,
                      std::optional<std::size_t> exclude = std::nullopt) const {
    return knn(query, k, exclude).back().distance;
  }

 private:
  int cell_coord(double x) const {
    return std::min(static_cast<int>(x / cell_size_), cells_per_axis_ - 1);
  }

  std::size_t cell_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * cells_per_axis_ + j) * cells_per_axis_ + k;
  }

  int wrap_cell(int c) const {
    c %= cells_per_axis_;
    return c < 0 ? c + cells_per_axis_ : c;
  }

  void offer(const Vec3& query, std::size_t id, std::size_t k, std::vector<Neighbor>& heap) const {
    const Neighbor cand{id, periodic_distance(query, points_[id], box_)};
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), neighbor_less);
    } else if (neighbor_less(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), neighbor_less);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), neighbor_less);
    }
  }

  void visit_cell(int ci, int cj, int ck, const Vec3& query, std::size_t k,
                  std::optional<std::size_t> exclude, std::vector<Neighbor>& heap) const {
    const auto c = cell_index(wrap_cell(ci), wrap_cell(cj), wrap_cell(ck));
    for (std::size_t m = cell_start_[c]; m < cell_start_[c + 1]; ++m) {
      const std::size_t id = members_[m];
      if (exclude && id == *exclude) continue;
      offer(query, id, k, heap);
    }
  }

  // Visits Chebyshev shells of cells around the query cell. After shell r, any
  // unvisited point is at least r cell widths away along some axis, so the
  // search stops once the current k-th distance is strictly below that bound.
  void search(const Vec3& query, std::size_t k, std::optional<std::size_t> exclude,
              std::vector<Neighbor>& heap) const {
    const int qi = cell_coord(query[0]);
    const int qj = cell_coord(query[1]);
    const int qk = cell_coord(query[2]);
    const int m = cells_per_axis_;
    for (int r = 0;; ++r) {
      if (2 * r + 1 >= m) {
        // Shell covers the whole box: finish with every cell not yet visited.
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < m; ++j) {
            for (int kk = 0; kk < m; ++kk) {
              const int di = chebyshev_offset(i - qi), dj = chebyshev_offset(j - qj),
                        dk = chebyshev_offset(kk - qk);
              if (std::max({di, dj, dk}) < r) continue;
              visit_cell(i, j, kk, query, k, exclude, heap);
            }
          }
        }
        return;
      }
      for (int di = -r; di <= r; ++di) {
        for (int dj = -r; dj <= r; ++dj) {
          const bool face = std::abs(di) == r || std::abs(dj) == r;
          for (int dk = -r; dk <= r; dk += (face ? 1 : 2 * std::max(r, 1))) {
            visit_cell(qi + di, qj + dj, qk + dk, query, k, exclude, heap);
            if (r == 0) break;
          }
        }
      }
      // Rounding in cell assignment is far below this margin.
      const double bound = (r - 1e-9) * cell_size_;
      if (heap.size() == k && heap.front().distance < bound) return;
    }
  }

  // Smallest |offset| of a cell index difference under periodic wrap.
  int chebyshev_offset(int d) const {
    d = std::abs(d) % cells_per_axis_;
    return std::min(d, cells_per_axis_ - d);
  }

  double box_;
  std::vector<Vec3> points_;
  int cells_per_axis_ = 1;
  double cell_size_ = 0.0;
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> members_;
};

inline PeriodicIndex build_index(std::span<const Vec3> points, double box_size) {
  return PeriodicIndex(points, box_size);
}

struct SmoothingRadii {
  Species kind = Species::gas;
  std::vector<double> radii;
};

inline constexpr std::size_t default_neighbor_count = 32;

inline bool uses_adaptive_radius(Species kind) {
  return kind == Species::gas || kind == Species::dark_matter;
}

// Gas and dark matter: exact periodic distance to the k-th closest other
// particle of the same species. Stars and black holes: zero (point masses).
inline SmoothingRadii smoothing_radii(const ParticleSet& set, double box_size,
                                      std::size_t k = default_neighbor_count,
                                      unsigned workers = default_workers()) {
  SmoothingRadii out;
  out.kind = set.kind;
  out.radii.assign(set.count(), 0.0);
  if (!uses_adaptive_radius(set.kind) || set.count() == 0) return out;
  if (set.count() <= k) {
    fail(ErrorCode::insufficient_points,
         std::string(species_name(set.kind)) + " has " + std::to_string(set.count()) +
             " particles; need more than k=" + std::to_string(k));
  }
  const PeriodicIndex index(set.positions, box_size);
  parallel_for(set.count(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out.radii[i] = index.kth_distance(set.positions[i], k, i);
    }
  });
  return out;
}

}  // namespace multifield
