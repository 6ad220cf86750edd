#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "opfr/cfgen.hpp"
#include "opfr/model.hpp"
#include "opfr/sampling.hpp"
#include "opfr/synth.hpp"

namespace opfr {

/// Which pair-feature columns feed the shared MLP.
enum class FeatureSet {
  full,          ///< relative position, orientation, curvature proxy (9)
  rel_pos_only,  ///< relative position (3)
  no_curvature,  ///< relative position and orientation (6)
};

std::size_t feature_width(FeatureSet set);
Matrix select_features(const FeatureMatrix& rows, FeatureSet set);

struct ToyTrainConfig {
  std::vector<std::size_t> hidden{30, 30, 30};
  bool batch_norm = true;
  Pooling pooling = Pooling::sum;
  FeatureSet features = FeatureSet::full;
  SamplingConfig sampling;
  PairAnchor anchor = PairAnchor::centroid;
  std::size_t interest_points = 32;  ///< points per cloud fed to the head
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 0.002;
  double lr_decay = 0.7;          ///< multiplied in every `decay_every` epochs
  std::size_t decay_every = 10;
  double weight_decay = 0.01;     ///< decoupled (AdamW)
  double label_smoothing = 0.3;
  /// Recompute batch norm running moments over the training set after every epoch.
  bool precise_batch_norm = true;
  std::uint64_t seed = 7;

  MlpSpec mlp_spec() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Linear classifier over the mean of per-point features.
struct LinearHead {
  Matrix weight;  // classes x features
  Vector bias;
};

struct TrainResult {
  MlpParams params;
  LinearHead head;
  std::vector<EpochMetrics> history;
  double final_test_accuracy = 0.0;
};

/// Smoothed target: 1 - eps on the label, eps / (C - 1) elsewhere.
Eigen::RowVectorXd smoothed_target(std::size_t classes, int label, double eps);

/// Cross-entropy of softmax(logits) against the smoothed target. Writes d loss / d logits when asked.
double smoothed_cross_entropy(const Eigen::RowVectorXd& logits, int label, double eps,
                              Eigen::RowVectorXd* grad = nullptr);

/// Pair features of `interest_points` seeded-random points per cloud, stacked point-major.
struct PreparedCloud {
  Matrix rows;  // interest_points * pairs_per_point x feature_width
  int label = 0;
};
std::vector<PreparedCloud> prepare_clouds(std::span<const LabeledCloud> clouds, const ToyTrainConfig& cfg,
                                          std::uint64_t salt);

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Trains MLP and head with AdamW on label-smoothed cross-entropy. Single
/// threaded and fully determined by the config seed.
TrainResult train_toy(const ToyDataset& data, const ToyTrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Same, on already prepared features.
TrainResult train_prepared(std::span<const PreparedCloud> train, std::span<const PreparedCloud> test,
                           std::size_t classes, const ToyTrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Held-out accuracy in eval mode.
double evaluate(const MlpParams& params, const LinearHead& head, std::span<const PreparedCloud> clouds,
                const ToyTrainConfig& cfg);

}  // namespace opfr
