#include "opfr/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <type_traits>

#include <Eigen/Geometry>

#include "opfr/error.hpp"

namespace opfr {

void ShapeSpec::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("shape spec: radius must be positive");
  if (!(extent > 0.0) || !std::isfinite(extent)) throw ConfigError("shape spec: extent must be positive");
  if (count < 16) throw ConfigError("shape spec: count must be at least 16");
  if (oversample < 1) throw ConfigError("shape spec: oversample must be at least 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("shape spec: sigma must be non-negative");
  if (kind == ShapeKind::corner && !(dihedral_deg > 0.0 && dihedral_deg <= 180.0)) {
    throw ConfigError("shape spec: dihedral angle must lie in (0, 180] degrees");
  }
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::plane: return "plane";
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::corner: return "corner";
  }
  return "unknown";
}

ShapeKind shape_kind_from_string(const std::string& name) {
  if (name == "plane") return ShapeKind::plane;
  if (name == "sphere") return ShapeKind::sphere;
  if (name == "cylinder") return ShapeKind::cylinder;
  if (name == "corner") return ShapeKind::corner;
  throw ConfigError("unknown shape kind '" + name + "'");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SyntheticCloud generate(const ShapeSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t drawn = spec.count * spec.oversample;
  std::vector<Vec3> pts(drawn), nrm(drawn);
  std::vector<double> curv(drawn, 0.0);
  std::vector<int> patch(drawn, 0);
  const double e = spec.extent;
  const double r = spec.radius;

  for (std::size_t i = 0; i < drawn; ++i) {
    switch (spec.kind) {
      case ShapeKind::plane:
        pts[i] = Vec3((unit(rng) - 0.5) * e, (unit(rng) - 0.5) * e, 0.0);
        nrm[i] = Vec3::UnitZ();
        break;
      case ShapeKind::sphere: {
        Vec3 g;
        do {
          g = Vec3(gauss(rng), gauss(rng), gauss(rng));
        } while (g.norm() < 1e-9);
        nrm[i] = g.normalized();
        pts[i] = r * nrm[i];
        curv[i] = 1.0 / r;
        break;
      }
      case ShapeKind::cylinder: {
        const double x = (unit(rng) - 0.5) * e;
        const double t = 2.0 * std::numbers::pi * unit(rng);
        nrm[i] = Vec3(0.0, std::cos(t), std::sin(t));
        pts[i] = Vec3(x, r * nrm[i].y(), r * nrm[i].z());
        curv[i] = 1.0 / (2.0 * r);
        break;
      }
      case ShapeKind::corner: {
        const double s = unit(rng) * e;
        const double y = (unit(rng) - 0.5) * e;
        if (i % 2 == 0) {
          pts[i] = Vec3(s, y, 0.0);
          nrm[i] = Vec3::UnitZ();
        } else {
          const double a = spec.dihedral_deg * std::numbers::pi / 180.0;
          pts[i] = Vec3(s * std::cos(a), y, s * std::sin(a));
          nrm[i] = Vec3(std::sin(a), 0.0, -std::cos(a));
          patch[i] = 1;
        }
        break;
      }
    }
  }
  if (spec.oversample > 1) {
    const std::vector<Index> keep = fps(pts, spec.count, 0);
    auto pick = [&keep](auto& v) {
      std::remove_reference_t<decltype(v)> out;
      out.reserve(keep.size());
      for (Index k : keep) out.push_back(v[k]);
      v = std::move(out);
    };
    pick(pts);
    pick(nrm);
    pick(curv);
    pick(patch);
  }
  if (spec.sigma > 0.0) {
    for (Vec3& p : pts) p += spec.sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
  }
  return SyntheticCloud{PointCloud(std::move(pts), std::move(nrm)), std::move(curv), std::move(patch)};
}

ToyDataset make_toy_dataset(std::span<const ShapeSpec> classes, std::size_t n_per_class, double train_fraction,
                            std::uint64_t seed) {
  if (classes.size() < 2) throw ConfigError("toy dataset: need at least two classes");
  if (n_per_class < 2) throw ConfigError("toy dataset: need at least two samples per class");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("toy dataset: split must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n_per_class) * train_fraction));

  ToyDataset data;
  data.classes = classes.size();
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t s = 0; s < n_per_class; ++s) {
      const std::uint64_t sample_seed = mix_seed(mix_seed(seed, c), s);
      ShapeSpec spec = classes[c];
      spec.seed = sample_seed;
      SyntheticCloud shape = generate(spec);

      std::mt19937_64 rng(mix_seed(sample_seed, 0xa11ce));
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      std::uniform_real_distribution<double> shift(-1.0, 1.0);
      const Eigen::Matrix3d rot = Eigen::AngleAxisd(angle(rng), Vec3::UnitZ()).toRotationMatrix();
      const Vec3 t(shift(rng), shift(rng), shift(rng));

      std::vector<Vec3> pts(shape.cloud.size()), nrm(shape.cloud.size());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i] = rot * shape.cloud.point(i) + t;
        nrm[i] = (rot * shape.cloud.normal(i)).normalized();
      }
      LabeledCloud sample{PointCloud(std::move(pts), std::move(nrm)), static_cast<int>(c)};
      (s < n_train ? data.train : data.test).push_back(std::move(sample));
    }
  }
  return data;
}

std::vector<ShapeSpec> default_toy_classes(std::size_t points_per_cloud, double sigma) {
  const double area = 4.0 * std::numbers::pi;
  constexpr std::size_t kOversample = 4;
  ShapeSpec plane{ShapeKind::plane, 1.0, 90.0, std::sqrt(area), points_per_cloud, sigma, 0, kOversample};
  ShapeSpec sphere{ShapeKind::sphere, 1.0, 90.0, 2.0, points_per_cloud, sigma, 0, kOversample};
  ShapeSpec cylinder{ShapeKind::cylinder, 0.5, 90.0, area / (2.0 * std::numbers::pi * 0.5), points_per_cloud, sigma, 0,
                     kOversample};
  ShapeSpec corner{ShapeKind::corner, 1.0, 90.0, std::sqrt(area / 2.0), points_per_cloud, sigma, 0, kOversample};
  return {plane, sphere, cylinder, corner};
}

}  // namespace opfr
