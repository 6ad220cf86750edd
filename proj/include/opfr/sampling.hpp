#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "opfr/geom_core.hpp"

namespace opfr {

/// Where the per-centroid neighbors are searched.
enum class K3Domain {
  cloud,  ///< the full cloud
  k1set,  ///< only the interest point's k1-neighborhood
};

struct SamplingConfig {
  std::size_t k1 = 20;  ///< candidate neighbors of the interest point
  std::size_t k2 = 4;   ///< centroids selected by FPS among the candidates
  std::size_t k3 = 8;   ///< neighbors gathered around each centroid
  bool include_self = true;  ///< interest point belongs to its own k1-neighborhood
  K3Domain k3_domain = K3Domain::cloud;

  /// Throws ConfigError naming the violated bound.
  void validate(std::size_t cloud_size) const;
};

/// Per-interest-point output of hierarchical sampling.
///
/// `cluster_neighbors` is a row-major k2 x k3 table; row c lists the neighbors
/// of centroid c ascending by distance. The centroid itself is never listed.
struct HierarchicalSample {
  Index interest_index = 0;
  std::vector<Index> neighborhood;  ///< k1 candidate indices (ascending distance)
  std::vector<Index> centroid_indices;
  std::vector<Index> cluster_neighbors;
  std::size_t k3 = 0;

  std::size_t cluster_count() const noexcept { return centroid_indices.size(); }
  std::span<const Index> cluster(std::size_t c) const {
    return std::span<const Index>(cluster_neighbors).subspan(c * k3, k3);
  }

  bool operator==(const HierarchicalSample&) const = default;
};

/// k1-NN around point i, FPS down to k2 centroids seeded at i, k3-NN around each centroid.
HierarchicalSample hierarchical_sample(const PointCloud& cloud, const NeighborIndex& index, Index i,
                                       const SamplingConfig& cfg);

/// hierarchical_sample() for every point, in cloud order. `threads` caps worker count.
std::vector<HierarchicalSample> sample_all(const PointCloud& cloud, const SamplingConfig& cfg,
                                           std::size_t threads = 1);
std::vector<HierarchicalSample> sample_all(const PointCloud& cloud, const NeighborIndex& index,
                                           const SamplingConfig& cfg, std::size_t threads = 1);

}  // namespace opfr
