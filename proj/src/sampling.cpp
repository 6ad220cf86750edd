#include "opfr/sampling.hpp"

#include <algorithm>
#include <string>

#include "opfr/error.hpp"
#include "opfr/parallel.hpp"

namespace opfr {

namespace {

std::size_t step1_query_size(const SamplingConfig& cfg) { return cfg.include_self ? cfg.k1 : cfg.k1 + 1; }

// Candidates of interest point i from its ranked neighbor list (>= step1_query_size entries).
// Returns the candidates and the position FPS is seeded at.
std::pair<std::vector<Index>, std::size_t> candidates(std::span<const Index> ranked, Index i,
                                                      const SamplingConfig& cfg) {
  std::vector<Index> nb(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(step1_query_size(cfg)));
  auto self = std::find(nb.begin(), nb.end(), i);
  if (cfg.include_self) {
    // More than k1 exact duplicates with smaller indices can push i out; it is at distance 0 anyway.
    if (self == nb.end()) {
      nb.back() = i;
      self = nb.end() - 1;
    }
    return {std::move(nb), static_cast<std::size_t>(self - nb.begin())};
  }
  if (self != nb.end()) {
    nb.erase(self);
  } else {
    nb.pop_back();
  }
  return {std::move(nb), 0};
}

// Drops the centroid from its own ranked list (k3 + 1 entries) leaving k3 neighbors.
void append_without_self(std::span<const Index> ranked, Index centroid, std::size_t k3, std::vector<Index>& out) {
  std::size_t written = 0;
  bool skipped = false;
  for (Index idx : ranked) {
    if (written == k3) break;
    if (!skipped && idx == centroid) {
      skipped = true;
      continue;
    }
    out.push_back(idx);
    ++written;
  }
}

void append_from_k1set(const PointCloud& cloud, std::span<const Index> nb, Index centroid, std::size_t k3,
                       std::vector<Index>& out) {
  std::vector<NeighborIndex::Neighbor> ranked;
  ranked.reserve(nb.size());
  const Vec3& c = cloud.point(centroid);
  bool skipped = false;
  for (Index idx : nb) {
    if (!skipped && idx == centroid) {
      skipped = true;
      continue;
    }
    ranked.push_back({squared_distance(c, cloud.point(idx)), idx});
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
  });
  for (std::size_t j = 0; j < k3; ++j) out.push_back(ranked[j].index);
}

template <typename RankedFn>
HierarchicalSample sample_with(const PointCloud& cloud, Index i, const SamplingConfig& cfg, RankedFn&& ranked) {
  HierarchicalSample out;
  out.interest_index = i;
  out.k3 = cfg.k3;

  auto [nb, seed] = candidates(ranked(i, step1_query_size(cfg)), i, cfg);

  std::vector<Vec3> pts(nb.size());
  for (std::size_t j = 0; j < nb.size(); ++j) pts[j] = cloud.point(nb[j]);
  const std::vector<Index> picked = fps(pts, cfg.k2, seed);

  out.centroid_indices.reserve(cfg.k2);
  for (Index p : picked) out.centroid_indices.push_back(nb[p]);

  out.cluster_neighbors.reserve(cfg.k2 * cfg.k3);
  for (Index c : out.centroid_indices) {
    if (cfg.k3_domain == K3Domain::cloud) {
      append_without_self(ranked(c, cfg.k3 + 1), c, cfg.k3, out.cluster_neighbors);
    } else {
      append_from_k1set(cloud, nb, c, cfg.k3, out.cluster_neighbors);
    }
  }
  out.neighborhood = std::move(nb);
  return out;
}

}  // namespace

void SamplingConfig::validate(std::size_t n) const {
  auto fail = [](const std::string& msg) { throw ConfigError("sampling config: " + msg); };
  if (k1 < 1 || k2 < 1 || k3 < 1) fail("k1, k2 and k3 must be at least 1");
  if (k2 > k1) fail("k2=" + std::to_string(k2) + " exceeds k1=" + std::to_string(k1));
  if (step1_query_size(*this) > n) {
    fail("k1=" + std::to_string(k1) + " needs " + std::to_string(step1_query_size(*this)) +
         " points but the cloud holds " + std::to_string(n));
  }
  if (k3_domain == K3Domain::cloud && k3 + 1 > n) {
    fail("k3=" + std::to_string(k3) + " needs " + std::to_string(k3 + 1) + " points but the cloud holds " +
         std::to_string(n));
  }
  if (k3_domain == K3Domain::k1set && k3 + 1 > k1) {
    fail("k3=" + std::to_string(k3) + " cannot be drawn from a k1=" + std::to_string(k1) + " neighborhood");
  }
}

HierarchicalSample hierarchical_sample(const PointCloud& cloud, const NeighborIndex& index, Index i,
                                       const SamplingConfig& cfg) {
  cfg.validate(cloud.size());
  if (index.size() != cloud.size()) throw ConfigError("neighbor index was built over a different cloud");
  if (i >= cloud.size()) throw ConfigError("interest index " + std::to_string(i) + " out of range");
  std::vector<Index> scratch;
  return sample_with(cloud, i, cfg, [&](Index q, std::size_t k) -> std::span<const Index> {
    scratch = index.knn(cloud.point(q), k);
    return scratch;
  });
}

std::vector<HierarchicalSample> sample_all(const PointCloud& cloud, const SamplingConfig& cfg,
                                           std::size_t threads) {
  return sample_all(cloud, NeighborIndex(cloud), cfg, threads);
}

std::vector<HierarchicalSample> sample_all(const PointCloud& cloud, const NeighborIndex& index,
                                           const SamplingConfig& cfg, std::size_t threads) {
  cfg.validate(cloud.size());
  if (index.size() != cloud.size()) throw ConfigError("neighbor index was built over a different cloud");
  const std::size_t n = cloud.size();

  // Every query in the pipeline is a prefix of one ranked list per point, so rank once.
  const std::size_t depth = std::max(step1_query_size(cfg), cfg.k3_domain == K3Domain::cloud ? cfg.k3 + 1 : 0);
  std::vector<Index> ranked(n * depth);
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<NeighborIndex::Neighbor> found;
    index.knn(cloud.point(i), depth, found);
    for (std::size_t j = 0; j < depth; ++j) ranked[i * depth + j] = found[j].index;
  });

  std::vector<HierarchicalSample> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    out[i] = sample_with(cloud, i, cfg, [&](Index q, std::size_t k) {
      return std::span<const Index>(ranked).subspan(q * depth, k);
    });
  });
  return out;
}

}  // namespace opfr
