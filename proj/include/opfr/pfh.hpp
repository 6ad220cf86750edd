#pragma once

#include <cstddef>
#include <vector>

#include "opfr/geom_core.hpp"

namespace opfr {

struct PfhConfig {
  std::size_t k = 16;               ///< neighbors for normal estimation and for pair scoring
  std::size_t bins_per_angle = 5;
  bool normalized = false;          ///< divide histograms by the scored pair count

  void validate() const;
};

/// Joint (alpha, phi, theta) histogram flattened alpha-major to bins_per_angle^3 entries.
struct PfhDescriptor {
  std::vector<double> histogram;
  std::size_t scored_pairs = 0;
  std::size_t skipped_pairs = 0;  ///< degenerate pairs or pairs touching an undefined normal
};

/// PCA normals. Points whose neighborhood is rank deficient get a zero vector
/// and are listed in `undefined`.
struct NormalEstimate {
  std::vector<Vec3> normals;
  std::vector<Index> undefined;
};

/// Smallest-eigenvalue eigenvector of each k-neighborhood covariance (the point
/// itself included), oriented toward +z, then +x, then +y on exact ties.
NormalEstimate estimate_normals(const PointCloud& cloud, const NeighborIndex& index, std::size_t k,
                                std::size_t threads = 1);
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k, std::size_t threads = 1);

/// Normal of a single neighborhood; throws NormalUndefined when rank deficient.
Vec3 pca_normal(std::span<const Vec3> neighborhood);

struct DarbouxAngles {
  double alpha;  ///< v . n_t
  double phi;    ///< u . (p_t - p_s) / |p_t - p_s|
  double theta;  ///< atan2(w . n_t, u . n_t)
};

/// Angles of an oriented point pair in the exact frame of its source point.
///
/// The source is the point whose normal makes the smaller angle with the
/// connecting line (lexicographically smaller point on ties), so the result
/// does not depend on argument order. Throws DegeneratePair / DegenerateFrame.
DarbouxAngles darboux_angles(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);

/// Histogram over all unordered pairs of point i and its k nearest neighbors.
PfhDescriptor pfh_descriptor(const PointCloud& cloud, const NeighborIndex& index, std::span<const Vec3> normals,
                             Index i, const PfhConfig& cfg);
PfhDescriptor pfh_descriptor(const PointCloud& cloud, std::span<const Vec3> normals, Index i, const PfhConfig& cfg);

/// Normal estimation followed by a descriptor per point.
std::vector<PfhDescriptor> pfh_all(const PointCloud& cloud, const PfhConfig& cfg, std::size_t threads = 1);

}  // namespace opfr
