#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "opfr/geom_core.hpp"

namespace opfr {

/// Ordered triple of unit axes anchoring the geometry of one point pair.
struct LocalFrame {
  Vec3 u;
  Vec3 v;
  Vec3 w;
};

/// Degeneracy threshold on cross-product norms.
inline constexpr double kDegenerateEps = 1e-12;

/// Normal-based frame: u = n_i, v = (x_j - x_i) x u, w = u x v, all normalized.
///
/// Throws DegeneratePair when x_j == x_i and DegenerateFrame when the offset is
/// parallel to the normal.
LocalFrame exact_frame(const Vec3& xi, const Vec3& xj, const Vec3& ni);

/// Neighbors of a center sorted counterclockwise by their angle in [0, 2pi) in the global xy-plane.
///
/// Neighbors with zero projected radius have no angle; they follow the sorted
/// ones in input order. `order[k]` is the input position of `neighbors[k]`.
struct OrderedNeighborhood {
  Vec3 center;
  std::vector<Vec3> neighbors;
  std::vector<std::size_t> order;
  Vec3 mean;  ///< centroid of the neighbors, used to orient frames

  std::size_t size() const noexcept { return neighbors.size(); }
  std::size_t next(std::size_t j) const noexcept { return j + 1 == neighbors.size() ? 0 : j + 1; }
  std::size_t prev(std::size_t j) const noexcept { return j == 0 ? neighbors.size() - 1 : j - 1; }
};

/// Throws InsufficientNeighbors for fewer than three neighbors.
OrderedNeighborhood order_neighbors(const Vec3& center, std::span<const Vec3> neighbors);

/// Flips `w` so that it points away from the neighbor centroid, i.e. w . (center - mean) >= 0.
Vec3 orient_outward(const Vec3& w, const Vec3& center, const Vec3& mean);

/// Normal-free frame for the pair (center, neighbors[j]).
///
/// u points at the cyclic successor of j, v at its predecessor, and w is the
/// normalized u x v oriented by orient_outward(). u and v are generally not
/// orthogonal. Throws DegeneratePair when an adjacent neighbor coincides with
/// the center and DegenerateFrame when u and v are (anti)parallel.
LocalFrame approx_frame(const OrderedNeighborhood& nbhd, std::size_t j);

}  // namespace opfr
