#include "opfr/frames.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "opfr/error.hpp"

namespace opfr {

LocalFrame exact_frame(const Vec3& xi, const Vec3& xj, const Vec3& ni) {
  const Vec3 d = xj - xi;
  if (d.x() == 0.0 && d.y() == 0.0 && d.z() == 0.0) throw DegeneratePair("exact_frame: coincident points");
  const Vec3 u = ni;
  const Vec3 vc = d.cross(u);
  const double vn = vc.norm();
  if (vn < kDegenerateEps) throw DegenerateFrame("exact_frame: offset is parallel to the normal");
  const Vec3 v = vc / vn;
  const Vec3 wc = u.cross(v);
  const double wn = wc.norm();
  if (wn < kDegenerateEps) throw DegenerateFrame("exact_frame: normal is degenerate");
  return {u, v, wc / wn};
}

OrderedNeighborhood order_neighbors(const Vec3& center, std::span<const Vec3> neighbors) {
  if (neighbors.size() < 3) throw InsufficientNeighbors("order_neighbors: need at least 3 neighbors");

  const std::size_t k = neighbors.size();
  std::vector<double> angle(k);
  std::vector<bool> has_angle(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double dx = neighbors[j].x() - center.x();
    const double dy = neighbors[j].y() - center.y();
    has_angle[j] = dx != 0.0 || dy != 0.0;
    if (has_angle[j]) {
      angle[j] = std::atan2(dy, dx);
      if (angle[j] < 0.0) angle[j] += 2.0 * std::numbers::pi;  // start the sweep at the +x axis
    }
  }

  OrderedNeighborhood out;
  out.center = center;
  out.order.resize(k);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    if (has_angle[a] != has_angle[b]) return static_cast<bool>(has_angle[a]);
    return has_angle[a] && angle[a] < angle[b];
  });

  out.neighbors.reserve(k);
  out.mean = Vec3::Zero();
  for (std::size_t j : out.order) {
    out.neighbors.push_back(neighbors[j]);
    out.mean += neighbors[j];
  }
  out.mean /= static_cast<double>(k);
  return out;
}

Vec3 orient_outward(const Vec3& w, const Vec3& center, const Vec3& mean) {
  return w.dot(center - mean) < 0.0 ? Vec3(-w) : w;
}

LocalFrame approx_frame(const OrderedNeighborhood& nbhd, std::size_t j) {
  if (nbhd.size() < 3) throw InsufficientNeighbors("approx_frame: need at least 3 neighbors");
  const Vec3 a = nbhd.neighbors[nbhd.next(j)] - nbhd.center;
  const Vec3 b = nbhd.neighbors[nbhd.prev(j)] - nbhd.center;
  const double an = a.norm();
  const double bn = b.norm();
  if (an == 0.0 || bn == 0.0) throw DegeneratePair("approx_frame: adjacent neighbor coincides with the center");
  const Vec3 u = a / an;
  const Vec3 v = b / bn;
  const Vec3 c = u.cross(v);
  const double cn = c.norm();
  if (cn < kDegenerateEps) throw DegenerateFrame("approx_frame: adjacent neighbors are collinear with the center");
  return {u, v, orient_outward(c / cn, nbhd.center, nbhd.mean)};
}

}  // namespace opfr
