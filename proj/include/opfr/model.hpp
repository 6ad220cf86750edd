#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

namespace opfr {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Pooling : std::uint8_t { sum = 0, avg = 1, max = 2 };
enum class Activation : std::uint8_t { relu = 0 };
enum class Mode { train, eval };

/// Shape of the shared MLP: layer l maps widths[l] -> widths[l+1] as
/// linear, optional batch norm, activation. Rows are pooled per group.
struct MlpSpec {
  std::vector<std::size_t> widths{9, 30, 30, 30};
  std::vector<bool> batch_norm{true, true, true};
  bool bias = true;
  Activation activation = Activation::relu;
  Pooling pooling = Pooling::sum;

  std::size_t layers() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t in_dim() const { return widths.front(); }
  std::size_t out_dim() const { return widths.back(); }
  void validate() const;

  /// Widths `widths`, batch norm on every layer.
  static MlpSpec with_widths(std::vector<std::size_t> widths, Pooling pooling = Pooling::sum);

  bool operator==(const MlpSpec&) const = default;
};

/// Learnable parameters (weights, biases, BN scale/shift) for an MlpSpec.
std::size_t param_count(const MlpSpec& spec);

struct LayerParams {
  Matrix weight;  // out x in
  Vector bias;    // empty when the MlpSpec is bias-free
  Vector gamma, beta, running_mean, running_var;  // empty without batch norm
};

struct MlpParams {
  MlpSpec spec;
  std::vector<LayerParams> layers;

  /// Fan-in uniform initialization U(-1/sqrt(in), 1/sqrt(in)) from `seed`.
  static MlpParams init(const MlpSpec& spec, std::uint64_t seed);
  /// Throws ConfigError when a shape disagrees with the MlpSpec or a value is not finite.
  void validate() const;
};

struct LayerGrads {
  Matrix weight;
  Vector bias, gamma, beta;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;
};

inline constexpr double kBatchNormEps = 1e-5;

/// Activations kept by opfr_forward() for opfr_backward().
struct ForwardCache {
  bool valid = false;
  Mode mode = Mode::eval;
  Eigen::Index group_size = 0;
  std::vector<Matrix> input;     // layer inputs
  std::vector<Matrix> xhat;      // normalized pre-activations (batch norm layers)
  std::vector<Vector> inv_std;   // per-channel 1/sqrt(var + eps) used in the pass
  std::vector<Vector> batch_mean;
  std::vector<Vector> batch_var;
  std::vector<Matrix> output;    // post-activation
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;
};

/// Applies the shared MLP to every row of `pairs` and pools consecutive
/// blocks of `group_size` rows. Returns one row per group.
///
/// In train mode batch norm normalizes with the statistics of all rows of the
/// call; in eval mode it uses the running moments.
Matrix opfr_forward(const Matrix& pairs, Eigen::Index group_size, const MlpParams& params, Mode mode,
                    ForwardCache* cache = nullptr);

/// Single point: K x in pair rows -> pooled feature.
Vector opfr_forward(const Matrix& pairs, const MlpParams& params, Mode mode = Mode::eval);

/// Gradients of sum(upstream .* output) w.r.t. all parameters, and optionally
/// w.r.t. the input rows. Throws ConfigError on an empty cache.
MlpGrads opfr_backward(const ForwardCache& cache, const MlpParams& params, const Matrix& upstream,
                       Matrix* input_grad = nullptr);

/// Exponential moving update of batch norm running moments from a train-mode cache.
void update_running_stats(MlpParams& params, const ForwardCache& cache, double momentum = 0.1);

/// Binary format: "OPFR", u32 version, spec, then little-endian f64 parameters.
void write_params(std::ostream& os, const MlpParams& params);
MlpParams read_params(std::istream& is);
void save_params(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_params(const std::filesystem::path& path);

}  // namespace opfr
