#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "opfr/frames.hpp"
#include "opfr/geom_core.hpp"
#include "opfr/sampling.hpp"

namespace opfr {

inline constexpr std::size_t kPairFeatureDim = 9;

/// Explicit geometry of one point pair: location, orientation, curvature proxy.
///
/// A default-constructed (all zero) value is the sentinel used for degenerate
/// pairs; it contributes nothing under sum pooling.
struct PairGeometry {
  Vec3 rel_pos = Vec3::Zero();          ///< x_ij - anchor
  Vec3 orientation = Vec3::Zero();      ///< oriented frame normal w
  Vec3 curvature_proxy = Vec3::Zero();  ///< arccos(axis . dir) / |rel_pos| per axis (u, v, w)

  std::array<double, kPairFeatureDim> row() const;
  bool is_sentinel() const { return rel_pos.isZero(0.0) && orientation.isZero(0.0) && curvature_proxy.isZero(0.0); }
};

/// Throws DegeneratePair when the two points coincide.
PairGeometry pair_geometry(const Vec3& xi, const Vec3& xij, const LocalFrame& frame);

/// Point the relative positions are measured from.
enum class PairAnchor {
  centroid,  ///< the centroid of the cluster the neighbor belongs to
  interest,  ///< the interest point the sample was drawn for
};

struct PointPairFeatures {
  std::vector<PairGeometry> pairs;  ///< k2 * k3 entries, cluster-major
  std::size_t degenerate = 0;       ///< sentinel-filled entries
};

/// Pair features of one hierarchical sample.
///
/// For every cluster the neighbors are ordered by projected angle around the
/// centroid and each one gets an approximated frame from its angular
/// neighbors. Neighbors coinciding with the centroid are left out of the
/// angular ring and emitted last as sentinels; degenerate frames are
/// sentinel-filled in place.
PointPairFeatures point_pair_features(const PointCloud& cloud, const HierarchicalSample& sample,
                                      PairAnchor anchor = PairAnchor::centroid);

/// Row-major matrix of pair features: one row per point pair, kPairFeatureDim columns.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// All pair features of a cloud stacked into a (n * k2 * k3) x 9 matrix, point-major.
///
/// With the centroid anchor, cluster features depend only on the centroid and
/// its neighbor row, so each distinct cluster is evaluated once and reused.
struct CloudPairFeatures {
  FeatureMatrix rows;
  std::size_t pairs_per_point = 0;
  std::size_t degenerate = 0;
};
CloudPairFeatures pair_features_all(const PointCloud& cloud, std::span<const HierarchicalSample> samples,
                                    PairAnchor anchor = PairAnchor::centroid, std::size_t threads = 1);

}  // namespace opfr
