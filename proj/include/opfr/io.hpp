#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opfr/cfgen.hpp"
#include "opfr/geom_core.hpp"
#include "opfr/model.hpp"
#include "opfr/pfh.hpp"

namespace opfr {

enum class CloudFormat { xyz, ply, off };

/// Format implied by the file extension (.xyz/.txt/.pts, .ply, .off).
CloudFormat format_from_path(const std::filesystem::path& path);
CloudFormat format_from_string(const std::string& name);

/// Parses an in-memory file. Throws ParseError with a line number where one applies.
PointCloud parse_cloud(std::string_view bytes, CloudFormat format);
PointCloud read_cloud(const std::filesystem::path& path, std::optional<CloudFormat> format = std::nullopt);

/// PLY is written binary little-endian when `binary_ply` is set, ASCII otherwise.
std::string serialize_cloud(const PointCloud& cloud, CloudFormat format, bool binary_ply = false);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                 std::optional<CloudFormat> format = std::nullopt, bool binary_ply = false);

/// Per-point CSV table: index, x, y, z, then feature columns.
struct FeatureTable {
  std::vector<std::string> feature_columns;
  std::vector<Vec3> positions;
  Matrix values;  // rows = points

  std::size_t rows() const noexcept { return positions.size(); }
  std::size_t columns() const noexcept { return 4 + feature_columns.size(); }
};

/// Raw pair features: 9 columns per pair, named p<j>_<channel>.
FeatureTable raw_feature_table(const PointCloud& cloud, const CloudPairFeatures& features);
/// Learned per-point features r0..r<d-1>.
FeatureTable opfr_feature_table(const PointCloud& cloud, const Matrix& features);
/// Histogram bins h0..h<b-1>.
FeatureTable pfh_feature_table(const PointCloud& cloud, std::span<const PfhDescriptor> descriptors);

/// UTF-8 CSV with a header row; values printed with round-trip precision.
void write_feature_table(std::ostream& os, const FeatureTable& table);
void write_feature_table(const std::filesystem::path& path, const FeatureTable& table);

}  // namespace opfr
