#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "opfr/error.hpp"
#include "opfr/train.hpp"

using namespace opfr;

TEST_CASE("smoothed targets") {
  const Eigen::RowVectorXd t = smoothed_target(4, 2, 0.3);
  CHECK(t(2) == doctest::Approx(0.7));
  CHECK(t(0) == doctest::Approx(0.1));
  CHECK(t.sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(smoothed_target(1, 0, 0.3), ConfigError);
  CHECK_THROWS_AS(smoothed_target(4, 4, 0.3), ConfigError);
}

TEST_CASE("smoothed cross-entropy values") {
  const Eigen::RowVectorXd uniform = Eigen::RowVectorXd::Constant(4, 0.7);
  CHECK(smoothed_cross_entropy(uniform, 1, 0.3) == doctest::Approx(std::log(4.0)));
  CHECK(smoothed_cross_entropy(uniform, 1, 0.0) == doctest::Approx(std::log(4.0)));

  Eigen::RowVectorXd logits(3);
  logits << 2.0, -1.0, 0.5;
  const double z = std::exp(2.0) + std::exp(-1.0) + std::exp(0.5);
  CHECK(smoothed_cross_entropy(logits, 0, 0.0) == doctest::Approx(-std::log(std::exp(2.0) / z)));
  const double expected = -(0.8 * std::log(std::exp(2.0) / z) + 0.1 * std::log(std::exp(-1.0) / z) +
                            0.1 * std::log(std::exp(0.5) / z));
  CHECK(smoothed_cross_entropy(logits, 0, 0.2) == doctest::Approx(expected));

  // Large logits stay finite.
  logits << 1000.0, -1000.0, 0.0;
  CHECK(std::isfinite(smoothed_cross_entropy(logits, 1, 0.3)));
}

TEST_CASE("smoothed cross-entropy gradient matches finite differences") {
  Eigen::RowVectorXd logits(4);
  logits << 0.3, -1.2, 2.0, 0.1;
  Eigen::RowVectorXd grad;
  smoothed_cross_entropy(logits, 3, 0.3, &grad);
  CHECK(grad.sum() == doctest::Approx(0.0).epsilon(1e-12));
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 4; ++i) {
    Eigen::RowVectorXd a = logits, b = logits;
    a(i) += h;
    b(i) -= h;
    const double fd = (smoothed_cross_entropy(a, 3, 0.3) - smoothed_cross_entropy(b, 3, 0.3)) / (2 * h);
    CHECK(grad(i) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("feature selection") {
  CHECK(feature_width(FeatureSet::full) == 9);
  CHECK(feature_width(FeatureSet::no_curvature) == 6);
  CHECK(feature_width(FeatureSet::rel_pos_only) == 3);
  FeatureMatrix rows(2, 9);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = static_cast<double>(i);
  const Matrix six = select_features(rows, FeatureSet::no_curvature);
  CHECK(six.cols() == 6);
  CHECK(six(1, 5) == 14.0);
  CHECK(select_features(rows, FeatureSet::full) == rows);
  CHECK_THROWS_AS(select_features(FeatureMatrix(2, 6), FeatureSet::full), ConfigError);

  ToyTrainConfig cfg;
  cfg.features = FeatureSet::rel_pos_only;
  cfg.pooling = Pooling::max;
  const MlpSpec s = cfg.mlp_spec();
  CHECK(s.widths == std::vector<std::size_t>{3, 30, 30, 30});
  CHECK(s.pooling == Pooling::max);
}

namespace {

ToyTrainConfig small_config() {
  ToyTrainConfig cfg;
  cfg.hidden = {8, 8};
  cfg.interest_points = 6;
  cfg.epochs = 4;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.01;
  return cfg;
}

ToyDataset small_dataset() {
  auto classes = default_toy_classes(64);
  classes.resize(2);  // plane, sphere
  return make_toy_dataset(classes, 8, 0.75, 5);
}

}  // namespace

TEST_CASE("prepared rows") {
  const ToyDataset d = small_dataset();
  const ToyTrainConfig cfg = small_config();
  const auto prepared = prepare_clouds(d.train, cfg, 11);
  REQUIRE(prepared.size() == d.train.size());
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    CHECK(prepared[i].rows.rows() == 6 * 32);
    CHECK(prepared[i].rows.cols() == 9);
    CHECK(prepared[i].label == d.train[i].label);
  }
  // On a plane every offset is orthogonal to the frame normal.
  const Matrix& plane = prepared.front().rows;
  REQUIRE(prepared.front().label == 0);
  for (Eigen::Index r = 0; r < plane.rows(); ++r) {
    const double len = plane.row(r).head(3).norm();
    if (len > 0.0) CHECK(std::abs(plane(r, 8) * len - std::numbers::pi / 2) < 1e-6);
  }

  ToyTrainConfig too_many = cfg;
  too_many.interest_points = 65;
  CHECK_THROWS_AS(prepare_clouds(d.train, too_many, 11), ConfigError);
}

TEST_CASE("training is deterministic and reports every epoch") {
  const ToyDataset d = small_dataset();
  const ToyTrainConfig cfg = small_config();
  std::size_t calls = 0;
  const TrainResult a = train_toy(d, cfg, [&](const EpochMetrics& m) { CHECK(m.epoch == ++calls); });
  const TrainResult b = train_toy(d, cfg);
  CHECK(calls == 4);
  REQUIRE(a.history.size() == 4);
  CHECK(a.history[0].learning_rate == 0.01);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.history[e].test_accuracy == b.history[e].test_accuracy);
    CHECK(std::isfinite(a.history[e].train_loss));
  }
  for (std::size_t l = 0; l < a.params.layers.size(); ++l) {
    CHECK(a.params.layers[l].weight == b.params.layers[l].weight);
    CHECK(a.params.layers[l].running_var == b.params.layers[l].running_var);
  }
  CHECK(a.head.weight == b.head.weight);
  CHECK(a.final_test_accuracy == a.history.back().test_accuracy);

  ToyTrainConfig other = cfg;
  other.seed = 8;
  CHECK(train_toy(d, other).head.weight != a.head.weight);
}

TEST_CASE("learning rate schedule") {
  const ToyDataset d = small_dataset();
  ToyTrainConfig cfg = small_config();
  cfg.epochs = 5;
  cfg.decay_every = 2;
  const TrainResult r = train_toy(d, cfg);
  CHECK(r.history[1].learning_rate == 0.01);
  CHECK(r.history[2].learning_rate == doctest::Approx(0.007));
  CHECK(r.history[4].learning_rate == doctest::Approx(0.0049));
}

TEST_CASE("training fits a separable pair of classes") {
  const ToyDataset d = small_dataset();
  ToyTrainConfig cfg = small_config();
  cfg.epochs = 15;
  const TrainResult r = train_toy(d, cfg);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
  CHECK(r.history.back().train_accuracy >= 0.75);
}

TEST_CASE("training input errors") {
  const ToyTrainConfig cfg = small_config();
  ToyDataset empty;
  empty.classes = 2;
  CHECK_THROWS_AS(train_toy(empty, cfg), ConfigError);

  const ToyDataset d = small_dataset();
  auto prepared = prepare_clouds(d.train, cfg, 11);
  CHECK_THROWS_AS(train_prepared(prepared, {}, 1, cfg), ConfigError);
  for (auto& p : prepared) p.label = 0;
  CHECK_THROWS_AS(train_prepared(prepared, {}, 2, cfg), ConfigError);
  prepared.front().label = 5;
  CHECK_THROWS_AS(train_prepared(prepared, {}, 2, cfg), ConfigError);
}

TEST_CASE("running moments are recomputed over the training set") {
  const ToyDataset d = small_dataset();
  ToyTrainConfig cfg = small_config();
  cfg.epochs = 2;
  const auto train = prepare_clouds(d.train, cfg, 11);
  const TrainResult r = train_prepared(train, {}, 2, cfg);

  // Average of the per-batch moments of the first layer, batches in dataset order.
  Vector mean_sum = Vector::Zero(8), var_sum = Vector::Zero(8);
  std::size_t batches = 0;
  for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(train.size(), start + cfg.batch_size);
    Matrix x(0, 9);
    for (std::size_t i = start; i < end; ++i) {
      Matrix grown(x.rows() + train[i].rows.rows(), 9);
      grown << x, train[i].rows;
      x = grown;
    }
    ForwardCache cache;
    opfr_forward(x, 32, r.params, Mode::train, &cache);
    const double n = static_cast<double>(x.rows());
    mean_sum += cache.batch_mean[0];
    var_sum += cache.batch_var[0] * n / (n - 1.0);
    ++batches;
  }
  const double b = static_cast<double>(batches);
  CHECK((r.params.layers[0].running_mean - mean_sum / b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.params.layers[0].running_var - var_sum / b).cwiseAbs().maxCoeff() < 1e-12);

  cfg.precise_batch_norm = false;
  const TrainResult momentum = train_prepared(train, {}, 2, cfg);
  CHECK(momentum.params.layers[0].weight == r.params.layers[0].weight);
  CHECK(momentum.params.layers[0].running_mean != r.params.layers[0].running_mean);
}
