#include "opfr/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "opfr/error.hpp"

namespace opfr {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

// Whitespace tokenizer with line tracking; optionally treats '#' as a comment start.
class Tokenizer {
 public:
  Tokenizer(std::string_view text, bool comments, std::size_t first_line = 1)
      : text_(text), comments_(comments), line_(first_line) {}

  bool next(std::string_view& tok) {
    for (;;) {
      while (pos_ < text_.size() && is_space(text_[pos_])) {
        if (text_[pos_] == '\n') ++line_;
        ++pos_;
      }
      if (pos_ >= text_.size()) return false;
      if (comments_ && text_[pos_] == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_]) && !(comments_ && text_[pos_] == '#')) ++pos_;
    tok = text_.substr(start, pos_ - start);
    return true;
  }

  std::string_view expect(const char* what) {
    std::string_view tok;
    if (!next(tok)) throw ParseError(std::string("unexpected end of file, expected ") + what, line_);
    return tok;
  }

  std::size_t line() const noexcept { return line_; }

 private:
  std::string_view text_;
  bool comments_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

double to_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError("invalid number '" + std::string(tok) + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(tok) + "'", line);
  return v;
}

std::uint64_t to_count(std::string_view tok, std::size_t line) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("invalid count '" + std::string(tok) + "'", line);
  }
  if (v > (1ULL << 32)) throw ParseError("count " + std::string(tok) + " is too large", line);
  return v;
}

Vec3 unit_normal(const Vec3& n, std::size_t line) {
  const double len = n.norm();
  if (!(len > 0.0) || !std::isfinite(len)) throw ParseError("zero or invalid normal", line);
  return n / len;
}

PointCloud make_cloud(std::vector<Vec3> pts, std::vector<Vec3> nrm, bool with_normals) {
  if (pts.empty()) throw ParseError("file contains no points");
  try {
    return with_normals ? PointCloud(std::move(pts), std::move(nrm)) : PointCloud(std::move(pts));
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
}

PointCloud parse_xyz(std::string_view text) {
  std::vector<Vec3> pts, nrm;
  std::optional<bool> with_normals;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    std::array<double, 6> v{};
    std::size_t count = 0;
    Tokenizer tok(line, false, line_no);
    std::string_view t;
    while (tok.next(t)) {
      if (count == 6) throw ParseError("too many values on a row", line_no);
      v[count++] = to_double(t, line_no);
    }
    if (count == 0) continue;
    if (count != 3 && count != 6) throw ParseError("expected 3 or 6 values, found " + std::to_string(count), line_no);
    const bool has_n = count == 6;
    if (with_normals && *with_normals != has_n) throw ParseError("rows disagree on the presence of normals", line_no);
    with_normals = has_n;
    pts.emplace_back(v[0], v[1], v[2]);
    if (has_n) nrm.push_back(unit_normal(Vec3(v[3], v[4], v[5]), line_no));
  }
  return make_cloud(std::move(pts), std::move(nrm), with_normals.value_or(false));
}

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType ply_type(std::string_view name, std::size_t line) {
  if (name == "char" || name == "int8") return PlyType::i8;
  if (name == "uchar" || name == "uint8") return PlyType::u8;
  if (name == "short" || name == "int16") return PlyType::i16;
  if (name == "ushort" || name == "uint16") return PlyType::u16;
  if (name == "int" || name == "int32") return PlyType::i32;
  if (name == "uint" || name == "uint32") return PlyType::u32;
  if (name == "float" || name == "float32") return PlyType::f32;
  if (name == "double" || name == "float64") return PlyType::f64;
  throw ParseError("unknown PLY property type '" + std::string(name) + "'", line);
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 1;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::uint64_t count = 0;
  std::vector<PlyProperty> props;
};

// Binary little-endian cursor.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  double read(PlyType t) {
    const std::size_t n = ply_size(t);
    if (bytes_.size() - pos_ < n) throw ParseError("binary PLY body is truncated");
    std::uint64_t raw = 0;
    for (std::size_t i = 0; i < n; ++i) raw |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += n;
    switch (t) {
      case PlyType::i8: return static_cast<std::int8_t>(raw);
      case PlyType::u8: return static_cast<std::uint8_t>(raw);
      case PlyType::i16: return static_cast<std::int16_t>(raw);
      case PlyType::u16: return static_cast<std::uint16_t>(raw);
      case PlyType::i32: return static_cast<std::int32_t>(raw);
      case PlyType::u32: return static_cast<std::uint32_t>(raw);
      case PlyType::f32: return std::bit_cast<float>(static_cast<std::uint32_t>(raw));
      case PlyType::f64: return std::bit_cast<double>(raw);
    }
    return 0.0;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

PointCloud parse_ply(std::string_view bytes) {
  // Header.
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    if (pos >= bytes.size()) throw ParseError("PLY header is not terminated by end_header", line_no);
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    std::string_view l = bytes.substr(pos, end - pos);
    pos = std::min(bytes.size(), end + 1);
    ++line_no;
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    return l;
  };

  if (next_line() != "ply") throw ParseError("missing 'ply' magic", 1);
  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    const std::string_view l = next_line();
    Tokenizer tok(l, false, line_no);
    std::string_view kw;
    if (!tok.next(kw)) continue;
    if (kw == "end_header") break;
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      const std::string_view fmt = tok.expect("format name");
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw ParseError("unsupported PLY format '" + std::string(fmt) + "'", line_no);
      }
      have_format = true;
    } else if (kw == "element") {
      PlyElement e;
      e.name = std::string(tok.expect("element name"));
      e.count = to_count(tok.expect("element count"), line_no);
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw ParseError("property declared before any element", line_no);
      PlyProperty p;
      std::string_view t = tok.expect("property type");
      if (t == "list") {
        p.is_list = true;
        p.count_type = ply_type(tok.expect("list count type"), line_no);
        if (p.count_type == PlyType::f32 || p.count_type == PlyType::f64) {
          throw ParseError("list count type must be integral", line_no);
        }
        t = tok.expect("list item type");
      }
      p.type = ply_type(t, line_no);
      p.name = std::string(tok.expect("property name"));
      elements.back().props.push_back(std::move(p));
    } else {
      throw ParseError("unexpected header keyword '" + std::string(kw) + "'", line_no);
    }
  }
  if (!have_format) throw ParseError("PLY header lacks a format line");

  const PlyElement* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") vertex = &e;
  }
  if (!vertex || vertex->count == 0) throw ParseError("PLY file has no vertex element");
  auto find = [&](const char* name) -> int {
    for (std::size_t i = 0; i < vertex->props.size(); ++i) {
      if (vertex->props[i].name == name && !vertex->props[i].is_list) return static_cast<int>(i);
    }
    return -1;
  };
  const std::array<int, 3> xyz{find("x"), find("y"), find("z")};
  const std::array<int, 3> nxyz{find("nx"), find("ny"), find("nz")};
  if (std::find(xyz.begin(), xyz.end(), -1) != xyz.end()) throw ParseError("vertex element lacks x/y/z");
  const bool with_normals = std::find(nxyz.begin(), nxyz.end(), -1) == nxyz.end();

  const std::string_view body = bytes.substr(pos);
  std::vector<Vec3> pts, nrm;
  pts.reserve(std::min<std::uint64_t>(vertex->count, body.size()));
  std::vector<double> values;

  if (binary) {
    ByteReader rd(body);
    for (const auto& e : elements) {
      for (std::uint64_t i = 0; i < e.count; ++i) {
        values.assign(e.props.size(), 0.0);
        for (std::size_t p = 0; p < e.props.size(); ++p) {
          const PlyProperty& prop = e.props[p];
          if (prop.is_list) {
            const double n = rd.read(prop.count_type);
            if (n < 0 || n * static_cast<double>(ply_size(prop.type)) > static_cast<double>(rd.remaining())) {
              throw ParseError("binary PLY list exceeds the file");
            }
            for (std::uint64_t j = 0; j < static_cast<std::uint64_t>(n); ++j) rd.read(prop.type);
          } else {
            values[p] = rd.read(prop.type);
          }
        }
        if (&e == vertex) {
          const Vec3 pt(values[xyz[0]], values[xyz[1]], values[xyz[2]]);
          if (!pt.allFinite()) throw ParseError("non-finite vertex " + std::to_string(i));
          pts.push_back(pt);
          if (with_normals) nrm.push_back(unit_normal(Vec3(values[nxyz[0]], values[nxyz[1]], values[nxyz[2]]), 0));
        }
      }
      if (&e == vertex) break;  // later elements are irrelevant
    }
  } else {
    Tokenizer tok(body, false, line_no + 1);
    for (const auto& e : elements) {
      for (std::uint64_t i = 0; i < e.count; ++i) {
        values.assign(e.props.size(), 0.0);
        for (std::size_t p = 0; p < e.props.size(); ++p) {
          const PlyProperty& prop = e.props[p];
          if (prop.is_list) {
            const std::uint64_t n = to_count(tok.expect("list length"), tok.line());
            for (std::uint64_t j = 0; j < n; ++j) tok.expect("list item");
          } else if (&e == vertex) {
            const std::string_view t = tok.expect("vertex property");
            values[p] = to_double(t, tok.line());
          } else {
            tok.expect("property value");
          }
        }
        if (&e == vertex) {
          pts.emplace_back(values[xyz[0]], values[xyz[1]], values[xyz[2]]);
          if (with_normals) {
            nrm.push_back(unit_normal(Vec3(values[nxyz[0]], values[nxyz[1]], values[nxyz[2]]), tok.line()));
          }
        }
      }
      if (&e == vertex) break;
    }
  }
  return make_cloud(std::move(pts), std::move(nrm), with_normals);
}

PointCloud parse_off(std::string_view text) {
  Tokenizer tok(text, true);
  const std::string_view magic = tok.expect("OFF header");
  if (magic != "OFF") throw ParseError("missing 'OFF' header", tok.line());
  const std::uint64_t nv = to_count(tok.expect("vertex count"), tok.line());
  to_count(tok.expect("face count"), tok.line());
  to_count(tok.expect("edge count"), tok.line());
  if (nv == 0) throw ParseError("OFF file declares no vertices", tok.line());
  std::vector<Vec3> pts;
  pts.reserve(std::min<std::uint64_t>(nv, text.size()));
  for (std::uint64_t i = 0; i < nv; ++i) {
    Vec3 p;
    for (int d = 0; d < 3; ++d) {
      const std::string_view t = tok.expect("vertex coordinate");
      p[d] = to_double(t, tok.line());
    }
    pts.push_back(p);
  }
  return make_cloud(std::move(pts), {}, false);
}

void put_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

void put_f64_le(std::string& out, double v) {
  const auto raw = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((raw >> (8 * i)) & 0xff));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CloudFormat format_from_string(const std::string& name) {
  if (name == "xyz") return CloudFormat::xyz;
  if (name == "ply") return CloudFormat::ply;
  if (name == "off") return CloudFormat::off;
  throw ConfigError("unknown cloud format '" + name + "'");
}

CloudFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts") return CloudFormat::xyz;
  if (ext == ".ply") return CloudFormat::ply;
  if (ext == ".off") return CloudFormat::off;
  throw ConfigError("cannot infer a cloud format from '" + path.string() + "'");
}

PointCloud parse_cloud(std::string_view bytes, CloudFormat format) {
  switch (format) {
    case CloudFormat::xyz: return parse_xyz(bytes);
    case CloudFormat::ply: return parse_ply(bytes);
    case CloudFormat::off: return parse_off(bytes);
  }
  throw ConfigError("unknown cloud format");
}

PointCloud read_cloud(const std::filesystem::path& path, std::optional<CloudFormat> format) {
  const CloudFormat f = format ? *format : format_from_path(path);
  return parse_cloud(read_file(path), f);
}

std::string serialize_cloud(const PointCloud& cloud, CloudFormat format, bool binary_ply) {
  std::string out;
  const bool normals = cloud.has_normals();
  auto row = [&](std::size_t i) {
    const Vec3& p = cloud.point(i);
    for (int d = 0; d < 3; ++d) {
      if (d) out.push_back(' ');
      put_number(out, p[d]);
    }
    if (normals && format != CloudFormat::off) {
      for (int d = 0; d < 3; ++d) {
        out.push_back(' ');
        put_number(out, cloud.normal(i)[d]);
      }
    }
    out.push_back('\n');
  };

  switch (format) {
    case CloudFormat::xyz:
      for (std::size_t i = 0; i < cloud.size(); ++i) row(i);
      break;
    case CloudFormat::off:
      out += "OFF\n" + std::to_string(cloud.size()) + " 0 0\n";
      for (std::size_t i = 0; i < cloud.size(); ++i) row(i);
      break;
    case CloudFormat::ply:
      out += "ply\nformat ";
      out += binary_ply ? "binary_little_endian" : "ascii";
      out += " 1.0\nelement vertex " + std::to_string(cloud.size()) + "\n";
      out += "property double x\nproperty double y\nproperty double z\n";
      if (normals) out += "property double nx\nproperty double ny\nproperty double nz\n";
      out += "end_header\n";
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!binary_ply) {
          row(i);
          continue;
        }
        for (int d = 0; d < 3; ++d) put_f64_le(out, cloud.point(i)[d]);
        if (normals) {
          for (int d = 0; d < 3; ++d) put_f64_le(out, cloud.normal(i)[d]);
        }
      }
      break;
  }
  return out;
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, std::optional<CloudFormat> format,
                 bool binary_ply) {
  const CloudFormat f = format ? *format : format_from_path(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const std::string data = serialize_cloud(cloud, f, binary_ply);
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!os) throw Error("failed writing " + path.string());
}

namespace {

FeatureTable table_base(const PointCloud& cloud) {
  FeatureTable t;
  t.positions.assign(cloud.points().begin(), cloud.points().end());
  return t;
}

}  // namespace

FeatureTable raw_feature_table(const PointCloud& cloud, const CloudPairFeatures& features) {
  static constexpr std::array<const char*, kPairFeatureDim> channel = {"relx", "rely", "relz", "nx", "ny",
                                                                       "nz",   "pu",   "pv",   "pw"};
  const auto k = static_cast<Eigen::Index>(features.pairs_per_point);
  if (features.rows.rows() != static_cast<Eigen::Index>(cloud.size()) * k) {
    throw ConfigError("raw_feature_table: feature rows do not match the cloud");
  }
  FeatureTable t = table_base(cloud);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (const char* c : channel) t.feature_columns.push_back("p" + std::to_string(j) + "_" + c);
  }
  t.values.resize(static_cast<Eigen::Index>(cloud.size()), k * static_cast<Eigen::Index>(kPairFeatureDim));
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      t.values.row(i).segment(j * kPairFeatureDim, kPairFeatureDim) = features.rows.row(i * k + j);
    }
  }
  return t;
}

FeatureTable opfr_feature_table(const PointCloud& cloud, const Matrix& features) {
  if (features.rows() != static_cast<Eigen::Index>(cloud.size())) {
    throw ConfigError("opfr_feature_table: feature rows do not match the cloud");
  }
  FeatureTable t = table_base(cloud);
  for (Eigen::Index j = 0; j < features.cols(); ++j) t.feature_columns.push_back("r" + std::to_string(j));
  t.values = features;
  return t;
}

FeatureTable pfh_feature_table(const PointCloud& cloud, std::span<const PfhDescriptor> descriptors) {
  if (descriptors.size() != cloud.size()) throw ConfigError("pfh_feature_table: one descriptor per point required");
  FeatureTable t = table_base(cloud);
  const std::size_t bins = descriptors.empty() ? 0 : descriptors.front().histogram.size();
  for (std::size_t j = 0; j < bins; ++j) t.feature_columns.push_back("h" + std::to_string(j));
  t.values.resize(static_cast<Eigen::Index>(cloud.size()), static_cast<Eigen::Index>(bins));
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    for (std::size_t j = 0; j < bins; ++j) {
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = descriptors[i].histogram[j];
    }
  }
  return t;
}

void write_feature_table(std::ostream& os, const FeatureTable& table) {
  std::string line = "index,x,y,z";
  for (const auto& c : table.feature_columns) line += "," + c;
  line.push_back('\n');
  os << line;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    line = std::to_string(i);
    for (int d = 0; d < 3; ++d) {
      line.push_back(',');
      put_number(line, table.positions[i][d]);
    }
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      line.push_back(',');
      put_number(line, table.values(static_cast<Eigen::Index>(i), j));
    }
    line.push_back('\n');
    os << line;
  }
}

void write_feature_table(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_feature_table(os, table);
  if (!os) throw Error("failed writing " + path.string());
}

}  // namespace opfr
