#include "opfr/pfh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "opfr/error.hpp"
#include "opfr/frames.hpp"
#include "opfr/parallel.hpp"

namespace opfr {

namespace {

// Relative eigenvalue gap below which a neighborhood counts as collinear.
constexpr double kRankEps = 1e-12;

Vec3 orient_up(Vec3 n) {
  bool flip = false;
  if (n.z() != 0.0) {
    flip = n.z() < 0.0;
  } else if (n.x() != 0.0) {
    flip = n.x() < 0.0;
  } else {
    flip = n.y() < 0.0;
  }
  return flip ? Vec3(-n) : n;
}

bool lex_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

std::size_t quantize(double value, double lo, double hi, std::size_t bins) {
  const double t = (value - lo) / (hi - lo) * static_cast<double>(bins);
  if (!(t > 0.0)) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(t));
}

bool usable(const Vec3& n) { return !n.isZero(0.0); }

}  // namespace

void PfhConfig::validate() const {
  if (k < 3) throw ConfigError("pfh config: k must be at least 3, got " + std::to_string(k));
  if (bins_per_angle < 2) throw ConfigError("pfh config: bins_per_angle must be at least 2");
}

Vec3 pca_normal(std::span<const Vec3> nb) {
  if (nb.size() < 3) throw NormalUndefined("normal estimation needs at least 3 points");
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : nb) mean += p;
  mean /= static_cast<double>(nb.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : nb) {
    const Vec3 d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(nb.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Vec3 ev = solver.eigenvalues();  // ascending
  if (ev(2) <= 0.0 || ev(1) <= kRankEps * ev(2)) throw NormalUndefined("neighborhood is collinear or coincident");
  return orient_up(solver.eigenvectors().col(0).normalized());
}

NormalEstimate estimate_normals(const PointCloud& cloud, const NeighborIndex& index, std::size_t k,
                                std::size_t threads) {
  if (k < 3) throw ConfigError("estimate_normals: k must be at least 3, got " + std::to_string(k));
  if (k > cloud.size()) {
    throw ConfigError("estimate_normals: k=" + std::to_string(k) + " exceeds cloud size " +
                      std::to_string(cloud.size()));
  }
  NormalEstimate out;
  out.normals.assign(cloud.size(), Vec3::Zero());
  std::vector<char> bad(cloud.size(), 0);
  parallel_for(cloud.size(), threads, [&](std::size_t i) {
    std::vector<NeighborIndex::Neighbor> found;
    index.knn(cloud.point(i), k, found);
    std::vector<Vec3> nb(found.size());
    for (std::size_t j = 0; j < found.size(); ++j) nb[j] = cloud.point(found[j].index);
    try {
      out.normals[i] = pca_normal(nb);
    } catch (const NormalUndefined&) {
      bad[i] = 1;
    }
  });
  for (std::size_t i = 0; i < bad.size(); ++i) {
    if (bad[i]) out.undefined.push_back(i);
  }
  return out;
}

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k, std::size_t threads) {
  return estimate_normals(cloud, NeighborIndex(cloud), k, threads);
}

DarbouxAngles darboux_angles(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  const Vec3 d = p2 - p1;
  const double len = d.norm();
  if (len == 0.0) throw DegeneratePair("darboux_angles: coincident points");
  const double a1 = std::abs(n1.dot(d)) / len;
  const double a2 = std::abs(n2.dot(d)) / len;
  // Larger |cos| means a smaller angle between normal and connecting line.
  const bool first_is_source = a1 > a2 || (a1 == a2 && !lex_less(p2, p1));
  const Vec3& ps = first_is_source ? p1 : p2;
  const Vec3& ns = first_is_source ? n1 : n2;
  const Vec3& pt = first_is_source ? p2 : p1;
  const Vec3& nt = first_is_source ? n2 : n1;

  const LocalFrame f = exact_frame(ps, pt, ns);
  const Vec3 dir = (pt - ps) / len;
  return {f.v.dot(nt), f.u.dot(dir), std::atan2(f.w.dot(nt), f.u.dot(nt))};
}

PfhDescriptor pfh_descriptor(const PointCloud& cloud, const NeighborIndex& index, std::span<const Vec3> normals,
                             Index i, const PfhConfig& cfg) {
  if (cfg.k < 1 || cfg.bins_per_angle < 2) throw ConfigError("pfh_descriptor: invalid configuration");
  if (normals.size() != cloud.size()) throw ConfigError("pfh_descriptor: normals missing for the cloud");
  if (i >= cloud.size()) throw ConfigError("pfh_descriptor: index out of range");

  // The point itself plus its k nearest neighbors.
  std::vector<NeighborIndex::Neighbor> found;
  index.knn(cloud.point(i), cfg.k + 1, found);
  std::vector<Index> nb;
  nb.reserve(found.size());
  nb.push_back(i);
  for (const auto& f : found) {
    if (f.index != i && nb.size() < cfg.k + 1) nb.push_back(f.index);
  }

  const std::size_t bins = cfg.bins_per_angle;
  PfhDescriptor out;
  out.histogram.assign(bins * bins * bins, 0.0);
  for (std::size_t a = 0; a < nb.size(); ++a) {
    for (std::size_t b = a + 1; b < nb.size(); ++b) {
      const Vec3& na = normals[nb[a]];
      const Vec3& nbv = normals[nb[b]];
      if (!usable(na) || !usable(nbv)) {
        ++out.skipped_pairs;
        continue;
      }
      DarbouxAngles ang{};
      try {
        ang = darboux_angles(cloud.point(nb[a]), na, cloud.point(nb[b]), nbv);
      } catch (const DegeneratePair&) {
        ++out.skipped_pairs;
        continue;
      } catch (const DegenerateFrame&) {
        ++out.skipped_pairs;
        continue;
      }
      const std::size_t ia = quantize(ang.alpha, -1.0, 1.0, bins);
      const std::size_t ip = quantize(ang.phi, -1.0, 1.0, bins);
      const std::size_t it = quantize(ang.theta, -std::numbers::pi, std::numbers::pi, bins);
      out.histogram[(ia * bins + ip) * bins + it] += 1.0;
      ++out.scored_pairs;
    }
  }
  if (cfg.normalized && out.scored_pairs > 0) {
    for (double& h : out.histogram) h /= static_cast<double>(out.scored_pairs);
  }
  return out;
}

PfhDescriptor pfh_descriptor(const PointCloud& cloud, std::span<const Vec3> normals, Index i, const PfhConfig& cfg) {
  return pfh_descriptor(cloud, NeighborIndex(cloud), normals, i, cfg);
}

std::vector<PfhDescriptor> pfh_all(const PointCloud& cloud, const PfhConfig& cfg, std::size_t threads) {
  cfg.validate();
  if (cfg.k + 1 > cloud.size()) {
    throw ConfigError("pfh: k=" + std::to_string(cfg.k) + " needs " + std::to_string(cfg.k + 1) +
                      " points but the cloud holds " + std::to_string(cloud.size()));
  }
  const NeighborIndex index(cloud);
  const NormalEstimate normals = estimate_normals(cloud, index, cfg.k, threads);
  std::vector<PfhDescriptor> out(cloud.size());
  parallel_for(cloud.size(), threads,
               [&](std::size_t i) { out[i] = pfh_descriptor(cloud, index, normals.normals, i, cfg); });
  return out;
}

}  // namespace opfr
