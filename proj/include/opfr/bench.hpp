#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opfr/cfgen.hpp"
#include "opfr/geom_core.hpp"
#include "opfr/model.hpp"
#include "opfr/pfh.hpp"
#include "opfr/sampling.hpp"

namespace opfr {

inline constexpr std::size_t kMinBenchReps = 5;

struct BenchReport {
  std::string pipeline;
  std::size_t cloud_size = 0;
  std::size_t reps = 0;
  std::vector<double> times_ms;  // every rep, including the cold first one
  double median_ms = 0.0;        // over reps 2..n
  double speedup = 1.0;          // baseline median / this median
  std::vector<std::pair<std::string, std::string>> config;
};

struct BenchOptions {
  std::size_t reps = 20;
  std::size_t threads = 1;
  SamplingConfig sampling;
  PairAnchor anchor = PairAnchor::centroid;
  PfhConfig pfh;
  std::optional<MlpParams> mlp;  // adds the MLP forward pass to the OPFR pipeline
};

/// Median of warm reps (the first entry is dropped).
double warm_median(const std::vector<double>& times_ms);

/// Times both end-to-end pipelines on the same cloud. Returns {opfr, pfh}; speedups are relative to PFH.
std::pair<BenchReport, BenchReport> bench_pipelines(const PointCloud& cloud, const BenchOptions& options);

}  // namespace opfr
