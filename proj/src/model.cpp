#include "opfr/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include "opfr/error.hpp"

namespace opfr {

namespace {

// Column sums by sequential row accumulation (contiguous in row-major storage).
template <typename Expr>
Vector column_sums(const Expr& m) {
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) acc += m.row(r);
  return acc.transpose();
}

constexpr char kMagic[4] = {'O', 'P', 'F', 'R'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint64_t kMaxWidth = 1u << 20;

bool all_finite(const auto& m) { return m.allFinite(); }

// Little-endian primitives.
void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }
void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_uint(std::istream& is, int bytes) {
  unsigned char b[8] = {};
  if (!is.read(reinterpret_cast<char*>(b), bytes)) throw ParseError("parameter file is truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
double get_f64(std::istream& is) { return std::bit_cast<double>(get_uint(is, 8)); }

template <typename M>
void put_block(std::ostream& os, const M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put_f64(os, m.data()[i]);
}
template <typename M>
void get_block(std::istream& is, M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_f64(is);
}

}  // namespace

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("mlp spec: need at least one layer");
  for (std::size_t w : widths) {
    if (w == 0 || w > kMaxWidth) throw ConfigError("mlp spec: layer widths must be in [1, 2^20]");
  }
  if (batch_norm.size() != layers()) throw ConfigError("mlp spec: one batch-norm flag per layer required");
}

MlpSpec MlpSpec::with_widths(std::vector<std::size_t> w, Pooling pooling) {
  MlpSpec s;
  s.widths = std::move(w);
  s.batch_norm.assign(s.layers(), true);
  s.pooling = pooling;
  return s;
}

std::size_t param_count(const MlpSpec& spec) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    n += in * out;
    if (spec.bias) n += out;
    if (l < spec.batch_norm.size() && spec.batch_norm[l]) n += 2 * out;
  }
  return n;
}

MlpParams MlpParams::init(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  MlpParams p;
  p.spec = spec;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const auto in = static_cast<Eigen::Index>(spec.widths[l]);
    const auto out = static_cast<Eigen::Index>(spec.widths[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    LayerParams layer;
    layer.weight.resize(out, in);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    if (spec.bias) {
      layer.bias.resize(out);
      for (Eigen::Index i = 0; i < out; ++i) layer.bias(i) = dist(rng);
    }
    if (spec.batch_norm[l]) {
      layer.gamma = Vector::Ones(out);
      layer.beta = Vector::Zero(out);
      layer.running_mean = Vector::Zero(out);
      layer.running_var = Vector::Ones(out);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void MlpParams::validate() const {
  spec.validate();
  if (layers.size() != spec.layers()) throw ConfigError("mlp params: layer count does not match spec");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerParams& p = layers[l];
    const auto in = static_cast<Eigen::Index>(spec.widths[l]);
    const auto out = static_cast<Eigen::Index>(spec.widths[l + 1]);
    const std::string where = "mlp params: layer " + std::to_string(l);
    if (p.weight.rows() != out || p.weight.cols() != in) throw ConfigError(where + " weight shape mismatch");
    if (p.bias.size() != (spec.bias ? out : 0)) throw ConfigError(where + " bias shape mismatch");
    const Eigen::Index bn = spec.batch_norm[l] ? out : 0;
    if (p.gamma.size() != bn || p.beta.size() != bn || p.running_mean.size() != bn || p.running_var.size() != bn) {
      throw ConfigError(where + " batch-norm shape mismatch");
    }
    if (!all_finite(p.weight) || !all_finite(p.bias) || !all_finite(p.gamma) || !all_finite(p.beta) ||
        !all_finite(p.running_mean) || !all_finite(p.running_var)) {
      throw ConfigError(where + " holds non-finite values");
    }
    if (bn && (p.running_var.array() < 0.0).any()) throw ConfigError(where + " has negative running variance");
  }
}

Matrix opfr_forward(const Matrix& pairs, Eigen::Index group_size, const MlpParams& params, Mode mode,
                    ForwardCache* cache) {
  const MlpSpec& spec = params.spec;
  if (params.layers.size() != spec.layers()) throw ConfigError("opfr_forward: parameters do not match spec");
  if (pairs.cols() != static_cast<Eigen::Index>(spec.in_dim())) {
    throw ConfigError("opfr_forward: expected " + std::to_string(spec.in_dim()) + " input columns, got " +
                      std::to_string(pairs.cols()));
  }
  if (group_size < 1 || pairs.rows() == 0 || pairs.rows() % group_size != 0) {
    throw ConfigError("opfr_forward: row count must be a positive multiple of the group size");
  }

  if (cache) {
    *cache = ForwardCache{};
    cache->mode = mode;
    cache->group_size = group_size;
  }

  const Eigen::Index rows = pairs.rows();
  Matrix x = pairs;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const LayerParams& p = params.layers[l];
    // Eval rows must not depend on the batch height, so eval skips the blocked product.
    Matrix z = mode == Mode::eval ? Matrix(x.lazyProduct(p.weight.transpose())) : Matrix(x * p.weight.transpose());
    if (cache) cache->input.push_back(std::move(x));

    const Eigen::Index dim = z.cols();
    const bool bn = spec.batch_norm[l];
    const bool batch_stats = bn && mode == Mode::train;
    double* zp = z.data();
    Vector mean = batch_stats ? Vector::Zero(dim) : Vector();
    Vector var = batch_stats ? Vector::Zero(dim) : Vector();
    for (Eigen::Index r = 0; r < rows; ++r) {
      double* row = zp + r * dim;
      if (spec.bias) {
        for (Eigen::Index c = 0; c < dim; ++c) row[c] += p.bias[c];
      }
      if (batch_stats) {
        for (Eigen::Index c = 0; c < dim; ++c) mean[c] += row[c];
      }
    }
    if (batch_stats) {
      mean /= static_cast<double>(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double* row = zp + r * dim;
        for (Eigen::Index c = 0; c < dim; ++c) {
          const double t = row[c] - mean[c];
          var[c] += t * t;
        }
      }
      var /= static_cast<double>(rows);
    } else if (bn) {
      mean = p.running_mean;
      var = p.running_var;
    }

    // Normalize, scale, shift and rectify in one pass.
    Vector inv_std;
    Matrix xhat;
    if (bn) {
      inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
      if (cache) xhat.resize(rows, dim);
    }
    Matrix out(rows, dim);
    double* op = out.data();
    double* hp = xhat.data();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        const Eigen::Index i = r * dim + c;
        double v = zp[i];
        if (bn) {
          const double h = (v - mean[c]) * inv_std[c];
          if (hp) hp[i] = h;
          v = h * p.gamma[c] + p.beta[c];
        }
        op[i] = v > 0.0 ? v : 0.0;
      }
    }
    if (cache) {
      cache->xhat.push_back(std::move(xhat));
      cache->inv_std.push_back(std::move(inv_std));
      cache->batch_mean.push_back(bn ? std::move(mean) : Vector());
      cache->batch_var.push_back(bn ? std::move(var) : Vector());
      cache->output.push_back(out);
    }
    x = std::move(out);
  }

  const Eigen::Index groups = rows / group_size;
  const Eigen::Index dim = x.cols();
  Matrix pooled(groups, dim);
  if (cache && spec.pooling == Pooling::max) cache->argmax.resize(groups, dim);
  for (Eigen::Index g = 0; g < groups; ++g) {
    const auto block = x.middleRows(g * group_size, group_size);
    switch (spec.pooling) {
      case Pooling::sum:
      case Pooling::avg:
        // Row-by-row accumulation keeps the summation order independent of the group size.
        pooled.row(g).setZero();
        for (Eigen::Index r = 0; r < group_size; ++r) pooled.row(g) += block.row(r);
        if (spec.pooling == Pooling::avg) pooled.row(g) /= static_cast<double>(group_size);
        break;
      case Pooling::max:
        for (Eigen::Index c = 0; c < dim; ++c) {
          Eigen::Index best = 0;
          for (Eigen::Index r = 1; r < group_size; ++r) {
            if (block(r, c) > block(best, c)) best = r;
          }
          pooled(g, c) = block(best, c);
          if (cache) cache->argmax(g, c) = g * group_size + best;
        }
        break;
    }
  }
  if (cache) cache->valid = true;
  return pooled;
}

Vector opfr_forward(const Matrix& pairs, const MlpParams& params, Mode mode) {
  return opfr_forward(pairs, pairs.rows(), params, mode).row(0).transpose();
}

MlpGrads opfr_backward(const ForwardCache& cache, const MlpParams& params, const Matrix& upstream,
                       Matrix* input_grad) {
  if (!cache.valid) throw ConfigError("opfr_backward: no forward cache available");
  const MlpSpec& spec = params.spec;
  const std::size_t layers = spec.layers();
  if (cache.output.size() != layers) throw ConfigError("opfr_backward: cache does not match parameters");
  const Eigen::Index rows = cache.output.back().rows();
  const Eigen::Index k = cache.group_size;
  if (upstream.rows() != rows / k || upstream.cols() != cache.output.back().cols()) {
    throw ConfigError("opfr_backward: upstream gradient shape mismatch");
  }

  // Un-pool.
  Matrix grad = Matrix::Zero(rows, upstream.cols());
  for (Eigen::Index g = 0; g < upstream.rows(); ++g) {
    switch (spec.pooling) {
      case Pooling::sum:
        grad.middleRows(g * k, k).rowwise() = upstream.row(g);
        break;
      case Pooling::avg:
        grad.middleRows(g * k, k).rowwise() = upstream.row(g) / static_cast<double>(k);
        break;
      case Pooling::max:
        for (Eigen::Index c = 0; c < upstream.cols(); ++c) grad(cache.argmax(g, c), c) = upstream(g, c);
        break;
    }
  }

  MlpGrads out;
  out.layers.resize(layers);
  for (std::size_t li = layers; li-- > 0;) {
    const LayerParams& p = params.layers[li];
    LayerGrads& lg = out.layers[li];
    const Eigen::Index dim = grad.cols();
    double* gp = grad.data();
    const double* outp = cache.output[li].data();
    if (!spec.batch_norm[li]) {
      // Through the rectifier.
      for (Eigen::Index i = 0; i < grad.size(); ++i) {
        if (!(outp[i] > 0.0)) gp[i] = 0.0;
      }
    } else {
      // Rectifier, then the scale/shift gradients in the same pass.
      const double* hp = cache.xhat[li].data();
      Vector gsum = Vector::Zero(dim), ghsum = Vector::Zero(dim);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) {
          const Eigen::Index i = r * dim + c;
          if (!(outp[i] > 0.0)) gp[i] = 0.0;
          gsum[c] += gp[i];
          ghsum[c] += gp[i] * hp[i];
        }
      }
      lg.beta = gsum;
      lg.gamma = ghsum;
      const Vector& inv_std = cache.inv_std[li];
      if (cache.mode == Mode::train) {
        const double n = static_cast<double>(rows);
        const Vector sum_d = p.gamma.cwiseProduct(gsum);
        const Vector sum_dh = p.gamma.cwiseProduct(ghsum);
        for (Eigen::Index r = 0; r < rows; ++r) {
          for (Eigen::Index c = 0; c < dim; ++c) {
            const Eigen::Index i = r * dim + c;
            gp[i] = (n * p.gamma[c] * gp[i] - sum_d[c] - hp[i] * sum_dh[c]) * (inv_std[c] / n);
          }
        }
      } else {
        for (Eigen::Index r = 0; r < rows; ++r) {
          for (Eigen::Index c = 0; c < dim; ++c) gp[r * dim + c] *= p.gamma[c] * inv_std[c];
        }
      }
    }
    lg.weight = grad.transpose() * cache.input[li];
    if (spec.bias) lg.bias = column_sums(grad);
    if (li > 0 || input_grad) grad = grad * p.weight;
  }
  if (input_grad) *input_grad = std::move(grad);
  return out;
}

void update_running_stats(MlpParams& params, const ForwardCache& cache, double momentum) {
  if (!cache.valid || cache.mode != Mode::train) throw ConfigError("update_running_stats: needs a train-mode cache");
  const double n = static_cast<double>(cache.output.front().rows());
  const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (!params.spec.batch_norm[l]) continue;
    LayerParams& p = params.layers[l];
    p.running_mean = (1.0 - momentum) * p.running_mean + momentum * cache.batch_mean[l];
    p.running_var = (1.0 - momentum) * p.running_var + momentum * unbias * cache.batch_var[l];
  }
}

void write_params(std::ostream& os, const MlpParams& params) {
  params.validate();
  const MlpSpec& s = params.spec;
  os.write(kMagic, 4);
  put_u32(os, kFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(s.layers()));
  for (std::size_t w : s.widths) put_u64(os, w);
  for (bool bn : s.batch_norm) put_u8(os, bn ? 1 : 0);
  put_u8(os, s.bias ? 1 : 0);
  put_u8(os, static_cast<std::uint8_t>(s.activation));
  put_u8(os, static_cast<std::uint8_t>(s.pooling));
  for (const LayerParams& p : params.layers) {
    put_block(os, p.weight);
    put_block(os, p.bias);
    put_block(os, p.gamma);
    put_block(os, p.beta);
    put_block(os, p.running_mean);
    put_block(os, p.running_var);
  }
  if (!os) throw Error("failed to write parameters");
}

MlpParams read_params(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw ParseError("not an OPFR parameter file");
  const auto version = get_uint(is, 4);
  if (version != kFormatVersion) throw ParseError("unsupported parameter format version " + std::to_string(version));
  const auto layers = get_uint(is, 4);
  if (layers == 0 || layers > 1024) throw ParseError("implausible layer count " + std::to_string(layers));

  MlpParams p;
  p.spec.widths.resize(layers + 1);
  for (auto& w : p.spec.widths) {
    w = get_uint(is, 8);
    if (w == 0 || w > kMaxWidth) throw ParseError("implausible layer width " + std::to_string(w));
  }
  p.spec.batch_norm.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) p.spec.batch_norm[l] = get_uint(is, 1) != 0;
  p.spec.bias = get_uint(is, 1) != 0;
  const auto act = get_uint(is, 1);
  const auto pool = get_uint(is, 1);
  if (act != 0) throw ParseError("unknown activation code " + std::to_string(act));
  if (pool > 2) throw ParseError("unknown pooling code " + std::to_string(pool));
  p.spec.activation = Activation::relu;
  p.spec.pooling = static_cast<Pooling>(pool);

  // Refuse to allocate more than the stream can still deliver.
  std::uint64_t doubles = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::uint64_t out = p.spec.widths[l + 1];
    doubles += p.spec.widths[l] * out + (p.spec.bias ? out : 0) + (p.spec.batch_norm[l] ? 4 * out : 0);
  }
  const auto here = is.tellg();
  if (here >= 0) {
    is.seekg(0, std::ios::end);
    const auto end = is.tellg();
    is.seekg(here);
    if (end >= here && static_cast<std::uint64_t>(end - here) < 8 * doubles) {
      throw ParseError("parameter file is truncated");
    }
  }

  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<Eigen::Index>(p.spec.widths[l]);
    const auto out = static_cast<Eigen::Index>(p.spec.widths[l + 1]);
    LayerParams lp;
    lp.weight.resize(out, in);
    get_block(is, lp.weight);
    if (p.spec.bias) {
      lp.bias.resize(out);
      get_block(is, lp.bias);
    }
    if (p.spec.batch_norm[l]) {
      for (Vector* v : {&lp.gamma, &lp.beta, &lp.running_mean, &lp.running_var}) {
        v->resize(out);
        get_block(is, *v);
      }
    }
    p.layers.push_back(std::move(lp));
  }
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
  return p;
}

void save_params(const std::filesystem::path& path, const MlpParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_params(os, params);
}

MlpParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open " + path.string());
  return read_params(is);
}

}  // namespace opfr
