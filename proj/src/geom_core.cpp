#include "opfr/geom_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "opfr/error.hpp"

namespace opfr {

namespace {

constexpr std::uint32_t kLeafSize = 8;

bool finite(const Vec3& p) { return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z()); }

// Lexicographic (distance, index) order used for every neighbor ranking.
bool closer(const NeighborIndex::Neighbor& a, const NeighborIndex::Neighbor& b) {
  return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}

}  // namespace

PointCloud::PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("point cloud must contain at least one point");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!finite(points_[i])) throw ConfigError("point " + std::to_string(i) + " has a non-finite coordinate");
  }
}

PointCloud::PointCloud(std::vector<Vec3> points, std::vector<Vec3> normals) : PointCloud(std::move(points)) {
  if (normals.size() != points_.size()) {
    throw ConfigError("normal count " + std::to_string(normals.size()) + " does not match point count " +
                      std::to_string(points_.size()));
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (!finite(normals[i]) || std::abs(normals[i].norm() - 1.0) > 1e-6) {
      throw ConfigError("normal " + std::to_string(i) + " is not a unit vector");
    }
  }
  normals_ = std::move(normals);
}

std::span<const Vec3> PointCloud::normals() const {
  if (!normals_) throw ConfigError("point cloud has no normals");
  return *normals_;
}

NeighborIndex::NeighborIndex(const PointCloud& cloud) : NeighborIndex(cloud.points()) {}

NeighborIndex::NeighborIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  if (points_.empty()) throw ConfigError("cannot build a neighbor index over an empty cloud");
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) throw ConfigError("cloud too large for index");
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(points_.size()));
  leaf_points_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) leaf_points_[i] = points_[order_[i]];
}

std::uint32_t NeighborIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end, 0, 0, 0, 0.0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    const double ca = points_[a][axis];
    const double cb = points_[b][axis];
    return ca < cb || (ca == cb && a < b);
  });
  const double split = points_[order_[mid]][axis];

  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.left = left;
  node.right = right;
  node.axis = axis;
  node.split = split;
  return id;
}

void NeighborIndex::search(std::uint32_t id, const Vec3& query, std::size_t k, double cell_dist, Vec3& offset,
                           std::vector<Neighbor>& best) const {
  const Node& node = nodes_[id];
  if (node.left == 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Neighbor cand{squared_distance(query, leaf_points_[i]), order_[i]};
      if (best.size() == k && !closer(cand, best.back())) continue;
      auto pos = std::upper_bound(best.begin(), best.end(), cand, closer);
      if (best.size() == k) best.pop_back();
      best.insert(pos, cand);
    }
    return;
  }
  // Left subtree coordinates are <= split, right subtree coordinates are >= split.
  const double diff = query[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  search(near, query, k, cell_dist, offset, best);

  // Squared distance from the query to the far cell's bounding region, updated along one axis.
  const double old = offset[node.axis];
  const double far_dist = cell_dist - old * old + diff * diff;
  // Equal bounds must still be visited since a tie can be won by a smaller index;
  // the slack absorbs rounding in the incremental update.
  if (best.size() < k || far_dist <= best.back().sq_dist * (1.0 + 1e-12)) {
    offset[node.axis] = diff;
    search(far, query, k, far_dist, offset, best);
    offset[node.axis] = old;
  }
}

void NeighborIndex::knn(const Vec3& query, std::size_t k, std::vector<Neighbor>& out) const {
  if (k < 1 || k > points_.size()) {
    throw ConfigError("knn: requested k=" + std::to_string(k) + " but the cloud holds " +
                      std::to_string(points_.size()) + " points");
  }
  out.clear();
  out.reserve(k + 1);
  Vec3 offset = Vec3::Zero();
  search(0, query, k, 0.0, offset, out);
}

std::vector<Index> NeighborIndex::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> found;
  knn(query, k, found);
  std::vector<Index> result(found.size());
  std::transform(found.begin(), found.end(), result.begin(), [](const Neighbor& n) { return n.index; });
  return result;
}

std::vector<Index> fps(std::span<const Vec3> points, std::size_t k, Index seed) {
  const std::size_t n = points.size();
  if (k < 1 || k > n) {
    throw ConfigError("fps: requested k=" + std::to_string(k) + " from " + std::to_string(n) + " points");
  }
  if (seed >= n) throw ConfigError("fps: seed index " + std::to_string(seed) + " out of range");

  std::vector<Index> selected;
  selected.reserve(k);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);

  Index current = seed;
  for (;;) {
    selected.push_back(current);
    taken[current] = true;
    if (selected.size() == k) break;
    Index next = n;
    double next_dist = -1.0;
    for (Index i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_dist[i] = std::min(min_dist[i], squared_distance(points[i], points[current]));
      // Strict comparison keeps the smallest index among equal maxima.
      if (min_dist[i] > next_dist) {
        next_dist = min_dist[i];
        next = i;
      }
    }
    current = next;
  }
  return selected;
}

}  // namespace opfr
