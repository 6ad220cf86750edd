#include "opfr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "opfr/error.hpp"

namespace opfr {

namespace {

struct ParamRef {
  double* data;
  Eigen::Index size;
};

// AdamW with PyTorch default moments.
class AdamW {
 public:
  AdamW(double weight_decay) : weight_decay_(weight_decay) {}

  void step(std::span<const ParamRef> params, std::span<const ParamRef> grads, double lr) {
    if (m_.empty()) {
      for (const ParamRef& p : params) {
        m_.emplace_back(Vector::Zero(p.size));
        v_.emplace_back(Vector::Zero(p.size));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Eigen::Map<Vector> theta(params[i].data, params[i].size);
      Eigen::Map<const Vector> g(grads[i].data, grads[i].size);
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g.cwiseProduct(g);
      theta *= 1.0 - lr * weight_decay_;
      theta.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double weight_decay_;
  std::size_t t_ = 0;
  std::vector<Vector> m_, v_;
};

template <typename M>
void add_ref(std::vector<ParamRef>& refs, M& m) {
  if (m.size() > 0) refs.push_back({const_cast<double*>(m.data()), m.size()});
}

std::vector<ParamRef> param_refs(MlpParams& p, LinearHead& head) {
  std::vector<ParamRef> refs;
  for (LayerParams& l : p.layers) {
    add_ref(refs, l.weight);
    add_ref(refs, l.bias);
    add_ref(refs, l.gamma);
    add_ref(refs, l.beta);
  }
  add_ref(refs, head.weight);
  add_ref(refs, head.bias);
  return refs;
}

std::vector<ParamRef> grad_refs(const MlpGrads& g, const Matrix& head_w, const Vector& head_b) {
  std::vector<ParamRef> refs;
  for (const LayerGrads& l : g.layers) {
    add_ref(refs, l.weight);
    add_ref(refs, l.bias);
    add_ref(refs, l.gamma);
    add_ref(refs, l.beta);
  }
  add_ref(refs, head_w);
  add_ref(refs, head_b);
  return refs;
}

Eigen::Index pairs_per_point(const ToyTrainConfig& cfg) { return static_cast<Eigen::Index>(cfg.sampling.k2 * cfg.sampling.k3); }

// Stacks clouds' rows and returns the per-cloud mean of pooled point features.
Matrix cloud_features(std::span<const PreparedCloud* const> batch, const MlpParams& params, const ToyTrainConfig& cfg,
                      Mode mode, ForwardCache* cache) {
  const Eigen::Index rows_per_cloud = batch.front()->rows.rows();
  Matrix x(rows_per_cloud * static_cast<Eigen::Index>(batch.size()), batch.front()->rows.cols());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    x.middleRows(static_cast<Eigen::Index>(b) * rows_per_cloud, rows_per_cloud) = batch[b]->rows;
  }
  const Matrix pooled = opfr_forward(x, pairs_per_point(cfg), params, mode, cache);
  const auto m = static_cast<Eigen::Index>(cfg.interest_points);
  Matrix feats(static_cast<Eigen::Index>(batch.size()), pooled.cols());
  for (Eigen::Index b = 0; b < feats.rows(); ++b) feats.row(b) = pooled.middleRows(b * m, m).colwise().mean();
  return feats;
}

// Replaces the running moments by the average batch moments over one pass of the training set.
void recalibrate_batch_norm(MlpParams& params, std::span<const PreparedCloud> train, const ToyTrainConfig& cfg) {
  const std::size_t layers = params.layers.size();
  std::vector<Vector> mean_sum(layers), var_sum(layers);
  std::size_t batches = 0;
  for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(train.size(), start + cfg.batch_size);
    std::vector<const PreparedCloud*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&train[i]);
    ForwardCache cache;
    cloud_features(batch, params, cfg, Mode::train, &cache);
    const double n = static_cast<double>(cache.output.front().rows());
    const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
    for (std::size_t l = 0; l < layers; ++l) {
      if (!params.spec.batch_norm[l]) continue;
      if (batches == 0) {
        mean_sum[l] = cache.batch_mean[l];
        var_sum[l] = unbias * cache.batch_var[l];
      } else {
        mean_sum[l] += cache.batch_mean[l];
        var_sum[l] += unbias * cache.batch_var[l];
      }
    }
    ++batches;
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (!params.spec.batch_norm[l]) continue;
    params.layers[l].running_mean = mean_sum[l] / static_cast<double>(batches);
    params.layers[l].running_var = var_sum[l] / static_cast<double>(batches);
  }
}

}  // namespace

std::size_t feature_width(FeatureSet set) {
  switch (set) {
    case FeatureSet::full: return 9;
    case FeatureSet::rel_pos_only: return 3;
    case FeatureSet::no_curvature: return 6;
  }
  return 9;
}

Matrix select_features(const FeatureMatrix& rows, FeatureSet set) {
  if (rows.cols() != static_cast<Eigen::Index>(kPairFeatureDim)) throw ConfigError("select_features: expected 9 columns");
  return rows.leftCols(static_cast<Eigen::Index>(feature_width(set)));
}

MlpSpec ToyTrainConfig::mlp_spec() const {
  MlpSpec s;
  s.widths.clear();
  s.widths.push_back(feature_width(features));
  s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
  s.batch_norm.assign(s.layers(), batch_norm);
  s.pooling = pooling;
  return s;
}

Eigen::RowVectorXd smoothed_target(std::size_t classes, int label, double eps) {
  if (classes < 2) throw ConfigError("label smoothing needs at least two classes");
  if (label < 0 || static_cast<std::size_t>(label) >= classes) throw ConfigError("label out of range");
  Eigen::RowVectorXd t = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(classes),
                                                      eps / static_cast<double>(classes - 1));
  t(label) = 1.0 - eps;
  return t;
}

double smoothed_cross_entropy(const Eigen::RowVectorXd& logits, int label, double eps, Eigen::RowVectorXd* grad) {
  const Eigen::RowVectorXd target = smoothed_target(static_cast<std::size_t>(logits.size()), label, eps);
  const double mx = logits.maxCoeff();
  const Eigen::RowVectorXd shifted = logits.array() - mx;
  const double lse = std::log(shifted.array().exp().sum());
  const Eigen::RowVectorXd log_p = shifted.array() - lse;
  if (grad) *grad = log_p.array().exp().matrix() - target;
  return -(target.array() * log_p.array()).sum();
}

std::vector<PreparedCloud> prepare_clouds(std::span<const LabeledCloud> clouds, const ToyTrainConfig& cfg,
                                          std::uint64_t salt) {
  std::vector<PreparedCloud> out;
  out.reserve(clouds.size());
  const std::size_t k = cfg.sampling.k2 * cfg.sampling.k3;
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const PointCloud& cloud = clouds[c].cloud;
    if (cfg.interest_points < 1 || cfg.interest_points > cloud.size()) {
      throw ConfigError("toy training: interest_points must lie in [1, cloud size]");
    }
    std::vector<Index> order(cloud.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(mix_seed(mix_seed(cfg.seed, salt), c));
    std::shuffle(order.begin(), order.end(), rng);

    const NeighborIndex index(cloud);
    FeatureMatrix rows(static_cast<Eigen::Index>(cfg.interest_points * k), kPairFeatureDim);
    for (std::size_t p = 0; p < cfg.interest_points; ++p) {
      const HierarchicalSample s = hierarchical_sample(cloud, index, order[p], cfg.sampling);
      const PointPairFeatures f = point_pair_features(cloud, s, cfg.anchor);
      for (std::size_t j = 0; j < k; ++j) {
        const auto r = f.pairs[j].row();
        for (std::size_t d = 0; d < kPairFeatureDim; ++d) {
          rows(static_cast<Eigen::Index>(p * k + j), static_cast<Eigen::Index>(d)) = r[d];
        }
      }
    }
    out.push_back({select_features(rows, cfg.features), clouds[c].label});
  }
  return out;
}

double evaluate(const MlpParams& params, const LinearHead& head, std::span<const PreparedCloud> clouds,
                const ToyTrainConfig& cfg) {
  if (clouds.empty()) return 0.0;
  std::size_t correct = 0;
  for (const PreparedCloud& c : clouds) {
    const PreparedCloud* one[] = {&c};
    const Matrix f = cloud_features(one, params, cfg, Mode::eval, nullptr);
    const Eigen::RowVectorXd logits = f.row(0) * head.weight.transpose() + head.bias.transpose();
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    if (best == c.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(clouds.size());
}

TrainResult train_prepared(std::span<const PreparedCloud> train, std::span<const PreparedCloud> test,
                           std::size_t classes, const ToyTrainConfig& cfg, const EpochCallback& on_epoch) {
  if (train.empty()) throw ConfigError("toy training: empty training set");
  if (classes < 2) throw ConfigError("toy training: need at least two classes");
  if (cfg.batch_size < 1) throw ConfigError("toy training: batch size must be positive");
  {
    std::vector<bool> seen(classes, false);
    for (const PreparedCloud& c : train) {
      if (c.label < 0 || static_cast<std::size_t>(c.label) >= classes) throw ConfigError("toy training: bad label");
      seen[static_cast<std::size_t>(c.label)] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2) {
      throw ConfigError("toy training: training set holds a single class");
    }
  }

  TrainResult result;
  result.params = MlpParams::init(cfg.mlp_spec(), mix_seed(cfg.seed, 1));
  const auto dim = static_cast<Eigen::Index>(result.params.spec.out_dim());
  const auto n_classes = static_cast<Eigen::Index>(classes);
  {
    std::mt19937_64 rng(mix_seed(cfg.seed, 2));
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    result.head.weight.resize(n_classes, dim);
    for (Eigen::Index i = 0; i < result.head.weight.size(); ++i) result.head.weight.data()[i] = dist(rng);
    result.head.bias.resize(n_classes);
    for (Eigen::Index i = 0; i < n_classes; ++i) result.head.bias(i) = dist(rng);
  }

  AdamW optimizer(cfg.weight_decay);
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 3));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto m = static_cast<Eigen::Index>(cfg.interest_points);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate *
                      std::pow(cfg.lr_decay, static_cast<double>(epoch / std::max<std::size_t>(1, cfg.decay_every)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const PreparedCloud*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train[order[i]]);
      const auto bsz = static_cast<Eigen::Index>(batch.size());

      ForwardCache cache;
      const Matrix feats = cloud_features(batch, result.params, cfg, Mode::train, &cache);
      Matrix dlogits(bsz, n_classes);
      for (Eigen::Index b = 0; b < bsz; ++b) {
        const Eigen::RowVectorXd logits = feats.row(b) * result.head.weight.transpose() + result.head.bias.transpose();
        Eigen::RowVectorXd g;
        loss_sum += smoothed_cross_entropy(logits, batch[static_cast<std::size_t>(b)]->label, cfg.label_smoothing, &g);
        Eigen::Index best = 0;
        logits.maxCoeff(&best);
        if (best == batch[static_cast<std::size_t>(b)]->label) ++correct;
        dlogits.row(b) = g / static_cast<double>(bsz);
      }

      const Matrix head_w_grad = dlogits.transpose() * feats;
      const Vector head_b_grad = dlogits.colwise().sum().transpose();
      const Matrix dfeats = dlogits * result.head.weight;
      Matrix dpooled(bsz * m, dim);
      for (Eigen::Index b = 0; b < bsz; ++b) {
        dpooled.middleRows(b * m, m).rowwise() = dfeats.row(b) / static_cast<double>(m);
      }
      const MlpGrads grads = opfr_backward(cache, result.params, dpooled);

      const auto params = param_refs(result.params, result.head);
      const auto gref = grad_refs(grads, head_w_grad, head_b_grad);
      optimizer.step(params, gref, lr);
      update_running_stats(result.params, cache);
    }

    if (cfg.precise_batch_norm) recalibrate_batch_norm(result.params, train, cfg);

    EpochMetrics metrics;
    metrics.epoch = epoch + 1;
    metrics.learning_rate = lr;
    metrics.train_loss = loss_sum / static_cast<double>(train.size());
    metrics.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    metrics.test_accuracy = evaluate(result.params, result.head, test, cfg);
    result.history.push_back(metrics);
    if (on_epoch) on_epoch(metrics);
  }
  result.final_test_accuracy = result.history.empty() ? 0.0 : result.history.back().test_accuracy;
  return result;
}

TrainResult train_toy(const ToyDataset& data, const ToyTrainConfig& cfg, const EpochCallback& on_epoch) {
  if (data.train.empty()) throw ConfigError("toy training: empty dataset");
  const auto train = prepare_clouds(data.train, cfg, 11);
  const auto test = prepare_clouds(data.test, cfg, 13);
  return train_prepared(train, test, data.classes, cfg, on_epoch);
}

}  // namespace opfr
