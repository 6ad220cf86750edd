#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "opfr/geom_core.hpp"

namespace opfr::testing {

inline std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

// Points on an integer lattice so exact distance ties are common.
inline std::vector<Vec3> lattice_points(std::size_t n, std::uint64_t seed, int extent = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(-extent, extent);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  for (;;) {
    Vec3 v(g(rng), g(rng), g(rng));
    if (v.norm() > 1e-3) return v.normalized();
  }
}

// Reference ranking: full sort by (squared distance, index).
inline std::vector<Index> brute_knn(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k) {
  std::vector<std::pair<double, Index>> d(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d[i] = {squared_distance(q, pts[i]), i};
  std::sort(d.begin(), d.end());
  std::vector<Index> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

inline Eigen::Matrix3d rotation_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace opfr::testing
