#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace opfr {

using Vec3 = Eigen::Vector3d;
using Index = std::size_t;

/// Squared Euclidean distance, summed as dx*dx + dy*dy + dz*dz in that order.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Ordered points with optional per-point unit normals.
///
/// Construction validates the invariants: at least one point, all coordinates
/// finite, and (if present) one unit normal per point.
class PointCloud {
 public:
  explicit PointCloud(std::vector<Vec3> points);
  PointCloud(std::vector<Vec3> points, std::vector<Vec3> normals);

  std::size_t size() const noexcept { return points_.size(); }
  const Vec3& point(Index i) const { return points_[i]; }
  std::span<const Vec3> points() const noexcept { return points_; }

  bool has_normals() const noexcept { return normals_.has_value(); }
  const Vec3& normal(Index i) const { return (*normals_)[i]; }
  std::span<const Vec3> normals() const;

 private:
  std::vector<Vec3> points_;
  std::optional<std::vector<Vec3>> normals_;
};

/// Balanced k-d tree answering exact k-nearest-neighbor queries.
///
/// Results are ordered by ascending distance with ties broken by ascending
/// point index, so they coincide element-for-element with a brute-force scan.
/// Immutable after construction; concurrent queries are safe.
class NeighborIndex {
 public:
  explicit NeighborIndex(const PointCloud& cloud);
  explicit NeighborIndex(std::span<const Vec3> points);

  std::size_t size() const noexcept { return points_.size(); }
  const Vec3& point(Index i) const { return points_[i]; }

  /// Indices of the k nearest points to `query`. Throws ConfigError unless 1 <= k <= size().
  std::vector<Index> knn(const Vec3& query, std::size_t k) const;

  struct Neighbor {
    double sq_dist;
    Index index;
  };
  /// Same as knn() but also returns squared distances. `out` is overwritten.
  void knn(const Vec3& query, std::size_t k, std::vector<Neighbor>& out) const;

 private:
  struct Node {
    // Leaf when `left` == 0: points are order_[begin, end).
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    int axis = 0;
    double split = 0.0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const Vec3& query, std::size_t k, double cell_dist, Vec3& offset,
              std::vector<Neighbor>& best) const;

  std::vector<Vec3> points_;
  std::vector<Index> order_;
  std::vector<Vec3> leaf_points_;  // points_ permuted by order_
  std::vector<Node> nodes_;
};

inline NeighborIndex build_index(const PointCloud& cloud) { return NeighborIndex(cloud); }

inline std::vector<Index> knn(const NeighborIndex& index, const Vec3& query, std::size_t k) {
  return index.knn(query, k);
}

/// Greedy farthest point sampling.
///
/// Starts from `seed` and repeatedly adds the unselected point whose minimum
/// distance to the selected set is largest; ties go to the smaller index.
/// The returned positions index into `points`.
std::vector<Index> fps(std::span<const Vec3> points, std::size_t k, Index seed);

}  // namespace opfr
