#include "opfr/cfgen.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "opfr/error.hpp"
#include "opfr/parallel.hpp"

namespace opfr {

namespace {

double clamped_acos(double c) { return std::acos(std::clamp(c, -1.0, 1.0)); }

// Writes the k3 pair features of one cluster into `out`, returns the sentinel count.
std::size_t cluster_pairs(const PointCloud& cloud, Index centroid, std::span<const Index> members,
                          const std::optional<Vec3>& anchor, std::span<PairGeometry> out) {
  const Vec3& c = cloud.point(centroid);
  std::vector<Vec3> ring;
  ring.reserve(members.size());
  std::size_t coincident = 0;
  for (Index m : members) {
    const Vec3& p = cloud.point(m);
    if (p == c) {
      ++coincident;
    } else {
      ring.push_back(p);
    }
  }

  std::fill(out.begin(), out.end(), PairGeometry{});
  if (ring.size() < 3) return members.size();

  const OrderedNeighborhood nbhd = order_neighbors(c, ring);
  const Vec3& origin = anchor ? *anchor : c;
  std::size_t degenerate = coincident;
  for (std::size_t j = 0; j < nbhd.size(); ++j) {
    try {
      out[j] = pair_geometry(origin, nbhd.neighbors[j], approx_frame(nbhd, j));
    } catch (const DegeneratePair&) {
      ++degenerate;
    } catch (const DegenerateFrame&) {
      ++degenerate;
    }
  }
  return degenerate;
}

}  // namespace

std::array<double, kPairFeatureDim> PairGeometry::row() const {
  return {rel_pos.x(),         rel_pos.y(),         rel_pos.z(),         orientation.x(),    orientation.y(),
          orientation.z(),     curvature_proxy.x(), curvature_proxy.y(), curvature_proxy.z()};
}

PairGeometry pair_geometry(const Vec3& xi, const Vec3& xij, const LocalFrame& frame) {
  const Vec3 rel = xij - xi;
  const double len = rel.norm();
  if (len == 0.0) throw DegeneratePair("pair_geometry: coincident points");
  const Vec3 dir = rel / len;
  PairGeometry g;
  g.rel_pos = rel;
  g.orientation = frame.w;
  g.curvature_proxy = Vec3(clamped_acos(frame.u.dot(dir)), clamped_acos(frame.v.dot(dir)),
                           clamped_acos(frame.w.dot(dir))) /
                      len;
  return g;
}

PointPairFeatures point_pair_features(const PointCloud& cloud, const HierarchicalSample& sample,
                                      PairAnchor anchor) {
  PointPairFeatures out;
  out.pairs.resize(sample.cluster_count() * sample.k3);
  std::optional<Vec3> origin;
  if (anchor == PairAnchor::interest) origin = cloud.point(sample.interest_index);
  for (std::size_t c = 0; c < sample.cluster_count(); ++c) {
    out.degenerate += cluster_pairs(cloud, sample.centroid_indices[c], sample.cluster(c), origin,
                                    std::span<PairGeometry>(out.pairs).subspan(c * sample.k3, sample.k3));
  }
  return out;
}

CloudPairFeatures pair_features_all(const PointCloud& cloud, std::span<const HierarchicalSample> samples,
                                    PairAnchor anchor, std::size_t threads) {
  CloudPairFeatures out;
  if (samples.empty()) return out;
  const std::size_t k3 = samples.front().k3;
  const std::size_t clusters = samples.front().cluster_count();
  out.pairs_per_point = k3 * clusters;
  out.rows.resize(static_cast<Eigen::Index>(samples.size() * out.pairs_per_point), kPairFeatureDim);
  std::vector<std::size_t> degenerate(samples.size(), 0);

  auto write = [&](std::size_t row, const PairGeometry& g) {
    const auto r = g.row();
    for (std::size_t d = 0; d < kPairFeatureDim; ++d) out.rows(static_cast<Eigen::Index>(row), d) = r[d];
  };

  if (anchor == PairAnchor::interest) {
    parallel_for(samples.size(), threads, [&](std::size_t i) {
      const PointPairFeatures f = point_pair_features(cloud, samples[i], anchor);
      for (std::size_t j = 0; j < f.pairs.size(); ++j) write(i * out.pairs_per_point + j, f.pairs[j]);
      degenerate[i] = f.degenerate;
    });
  } else {
    // Clusters keyed by centroid; a cached entry is reused only for an identical neighbor row.
    struct Cached {
      std::vector<Index> members;
      std::vector<PairGeometry> pairs;
      std::size_t degenerate = 0;
    };
    std::vector<Cached> cache(cloud.size());
    auto cluster_of = [&](Index centroid, std::span<const Index> members, Cached& scratch) -> const Cached& {
      Cached& slot = cache[centroid];
      if (!slot.pairs.empty() && std::equal(members.begin(), members.end(), slot.members.begin(), slot.members.end())) {
        return slot;
      }
      scratch.members.assign(members.begin(), members.end());
      scratch.pairs.resize(members.size());
      scratch.degenerate = cluster_pairs(cloud, centroid, members, std::nullopt, scratch.pairs);
      return scratch;
    };

    // Seed the cache serially from each point's own first cluster so later lookups are read-only.
    for (const HierarchicalSample& s : samples) {
      for (std::size_t c = 0; c < s.cluster_count(); ++c) {
        Cached& slot = cache[s.centroid_indices[c]];
        if (!slot.pairs.empty()) continue;
        slot.members.assign(s.cluster(c).begin(), s.cluster(c).end());
        slot.pairs.resize(k3);
        slot.degenerate = cluster_pairs(cloud, s.centroid_indices[c], s.cluster(c), std::nullopt, slot.pairs);
      }
    }
    parallel_for(samples.size(), threads, [&](std::size_t i) {
      const HierarchicalSample& s = samples[i];
      Cached scratch;
      for (std::size_t c = 0; c < s.cluster_count(); ++c) {
        const Cached& entry = cluster_of(s.centroid_indices[c], s.cluster(c), scratch);
        for (std::size_t j = 0; j < k3; ++j) write(i * out.pairs_per_point + c * k3 + j, entry.pairs[j]);
        degenerate[i] += entry.degenerate;
      }
    });
  }
  for (std::size_t d : degenerate) out.degenerate += d;
  return out;
}

}  // namespace opfr
