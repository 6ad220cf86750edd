#include "opfr/bench.hpp"

#include <algorithm>
#include <chrono>

#include "opfr/error.hpp"

namespace opfr {

namespace {

volatile double g_sink = 0.0;

template <typename Fn>
std::vector<double> time_reps(std::size_t reps, Fn&& fn) {
  std::vector<double> times;
  times.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    g_sink = g_sink + fn();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return times;
}

}  // namespace

double warm_median(const std::vector<double>& times_ms) {
  if (times_ms.size() < 2) throw ConfigError("warm_median: need at least two reps");
  std::vector<double> warm(times_ms.begin() + 1, times_ms.end());
  std::sort(warm.begin(), warm.end());
  const std::size_t m = warm.size() / 2;
  return warm.size() % 2 ? warm[m] : 0.5 * (warm[m - 1] + warm[m]);
}

std::pair<BenchReport, BenchReport> bench_pipelines(const PointCloud& cloud, const BenchOptions& options) {
  if (options.reps < kMinBenchReps) {
    throw ConfigError("bench: reps must be at least " + std::to_string(kMinBenchReps));
  }
  options.sampling.validate(cloud.size());
  options.pfh.validate();
  if (options.mlp) options.mlp->validate();

  const auto opfr_times = time_reps(options.reps, [&] {
    const NeighborIndex index = build_index(cloud);
    const auto samples = sample_all(cloud, index, options.sampling, options.threads);
    const CloudPairFeatures f = pair_features_all(cloud, samples, options.anchor, options.threads);
    double s = f.rows.sum();
    if (options.mlp) {
      s += opfr_forward(f.rows, static_cast<Eigen::Index>(f.pairs_per_point), *options.mlp, Mode::eval, nullptr).sum();
    }
    return s;
  });
  const auto pfh_times = time_reps(options.reps, [&] {
    const auto d = pfh_all(cloud, options.pfh, options.threads);
    double s = 0.0;
    for (const auto& h : d) s += h.histogram.front();
    return s;
  });

  const auto common = [&](BenchReport& r) {
    r.cloud_size = cloud.size();
    r.reps = options.reps;
    r.config.emplace_back("threads", std::to_string(options.threads));
  };

  BenchReport opfr;
  opfr.pipeline = options.mlp ? "opfr+mlp" : "opfr";
  common(opfr);
  opfr.times_ms = opfr_times;
  opfr.median_ms = warm_median(opfr_times);
  opfr.config.emplace_back("k1", std::to_string(options.sampling.k1));
  opfr.config.emplace_back("k2", std::to_string(options.sampling.k2));
  opfr.config.emplace_back("k3", std::to_string(options.sampling.k3));
  opfr.config.emplace_back("include_self", options.sampling.include_self ? "true" : "false");
  opfr.config.emplace_back("k3_domain", options.sampling.k3_domain == K3Domain::cloud ? "cloud" : "k1set");
  opfr.config.emplace_back("pair_anchor", options.anchor == PairAnchor::centroid ? "centroid" : "interest");

  BenchReport pfh;
  pfh.pipeline = "pfh";
  common(pfh);
  pfh.times_ms = pfh_times;
  pfh.median_ms = warm_median(pfh_times);
  pfh.config.emplace_back("k", std::to_string(options.pfh.k));
  pfh.config.emplace_back("bins_per_angle", std::to_string(options.pfh.bins_per_angle));
  pfh.config.emplace_back("normals", "pca");

  opfr.speedup = pfh.median_ms / opfr.median_ms;
  pfh.speedup = 1.0;
  return {std::move(opfr), std::move(pfh)};
}

}  // namespace opfr
