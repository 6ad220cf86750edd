#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "opfr/geom_core.hpp"

namespace opfr {

enum class ShapeKind { plane, sphere, cylinder, corner };

/// Analytic surface to sample.
///
/// plane: square of side `extent` in z = 0. sphere: full sphere of `radius`.
/// cylinder: lateral surface of `radius` around the x axis, length `extent`.
/// corner: two square half-planes of side `extent` meeting along the y axis at
/// `dihedral_deg`; the first lies in z = 0 with x >= 0.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::sphere;
  double radius = 1.0;
  double dihedral_deg = 90.0;
  double extent = 2.0;
  std::size_t count = 1024;
  double sigma = 0.0;  ///< isotropic Gaussian noise on the sampled points
  std::uint64_t seed = 0;
  /// Draw count * oversample uniform points and keep `count` of them by farthest point sampling.
  std::size_t oversample = 1;

  void validate() const;
};

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

/// Sampled shape plus analytic ground truth of the noise-free surface.
struct SyntheticCloud {
  PointCloud cloud;                    ///< carries the analytic unit normals
  std::vector<double> mean_curvature;  ///< 0 plane/corner, 1/R sphere, 1/(2R) cylinder
  std::vector<int> patch;              ///< corner face label (0 or 1), 0 elsewhere
};

SyntheticCloud generate(const ShapeSpec& spec);

struct LabeledCloud {
  PointCloud cloud;
  int label = 0;
};

struct ToyDataset {
  std::vector<LabeledCloud> train;
  std::vector<LabeledCloud> test;
  std::size_t classes = 0;
};

/// One class per template. Each sample is a fresh draw of its template with a
/// per-sample seed, randomly rotated about z and translated. The first
/// round(n_per_class * train_fraction) samples of every class go to train.
ToyDataset make_toy_dataset(std::span<const ShapeSpec> classes, std::size_t n_per_class, double train_fraction,
                            std::uint64_t seed);

/// Plane, sphere, cylinder and 90-degree corner of equal surface area (4 pi),
/// so the classes share a sampling density. Points are thinned from 4x as many
/// uniform samples by farthest point sampling, which keeps them evenly spaced.
std::vector<ShapeSpec> default_toy_classes(std::size_t points_per_cloud = 256, double sigma = 0.0);

/// Deterministic seed mixing (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace opfr
