// Command-line front end: feature export, PFH baseline, normals, benchmark, toy training, synthetic clouds.

#include <cstdio>
#ifdef __GLIBC__
#include <malloc.h>
#endif
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "opfr/bench.hpp"
#include "opfr/error.hpp"
#include "opfr/io.hpp"
#include "opfr/parallel.hpp"
#include "opfr/synth.hpp"
#include "opfr/train.hpp"

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kParse = 2, kNumeric = 3 };

struct Args {
  std::size_t threads = 0;

  std::string in;
  std::string out;

  // features
  std::size_t k1 = 20, k2 = 4, k3 = 8;
  std::string anchor = "centroid";
  std::string k3_domain = "cloud";
  bool raw = false;
  std::string opfr_params;
  bool no_self = false;

  // pfh / normals
  std::size_t k = 16;
  std::size_t bins = 5;
  bool normalized = false;

  // bench
  std::size_t n = 1024;
  std::size_t reps = 20;
  std::string shape = "sphere";
  std::string mlp_params;

  // train-toy
  std::size_t epochs = 50;
  std::uint64_t seed = 7;
  std::string pooling = "sum";
  std::string feature_set = "full";
  std::size_t per_class = 200;

  // synth
  std::string kind = "sphere";
  double radius = 1.0;
  double sigma = 0.0;
  double dihedral = 90.0;
  double extent = 2.0;
};

std::size_t thread_budget(const Args& a) { return a.threads > 0 ? a.threads : opfr::threads_from_env(1); }

opfr::SamplingConfig sampling_from(const Args& a) {
  opfr::SamplingConfig cfg;
  cfg.k1 = a.k1;
  cfg.k2 = a.k2;
  cfg.k3 = a.k3;
  cfg.include_self = !a.no_self;
  cfg.k3_domain = a.k3_domain == "k1set" ? opfr::K3Domain::k1set : opfr::K3Domain::cloud;
  return cfg;
}

int run_features(const Args& a) {
  const opfr::PointCloud cloud = opfr::read_cloud(a.in);
  const opfr::SamplingConfig cfg = sampling_from(a);
  const auto anchor = a.anchor == "interest" ? opfr::PairAnchor::interest : opfr::PairAnchor::centroid;
  const std::size_t threads = thread_budget(a);

  const auto samples = opfr::sample_all(cloud, cfg, threads);
  const opfr::CloudPairFeatures f = opfr::pair_features_all(cloud, samples, anchor, threads);
  if (f.degenerate > 0) std::cerr << "note: " << f.degenerate << " degenerate pairs emitted as zero rows\n";

  opfr::FeatureTable table;
  if (!a.opfr_params.empty()) {
    const opfr::MlpParams params = opfr::load_params(a.opfr_params);
    if (params.spec.in_dim() != opfr::kPairFeatureDim) {
      throw opfr::ConfigError("--opfr: parameters expect " + std::to_string(params.spec.in_dim()) +
                              " input channels, pair features have " + std::to_string(opfr::kPairFeatureDim));
    }
    const opfr::Matrix r =
        opfr::opfr_forward(f.rows, static_cast<Eigen::Index>(f.pairs_per_point), params, opfr::Mode::eval, nullptr);
    table = opfr::opfr_feature_table(cloud, r);
  } else {
    table = opfr::raw_feature_table(cloud, f);
  }
  opfr::write_feature_table(a.out, table);
  return kOk;
}

int run_pfh(const Args& a) {
  const opfr::PointCloud cloud = opfr::read_cloud(a.in);
  opfr::PfhConfig cfg;
  cfg.k = a.k;
  cfg.bins_per_angle = a.bins;
  cfg.normalized = a.normalized;
  const auto d = opfr::pfh_all(cloud, cfg, thread_budget(a));
  opfr::write_feature_table(a.out, opfr::pfh_feature_table(cloud, d));
  return kOk;
}

int run_normals(const Args& a) {
  const opfr::PointCloud cloud = opfr::read_cloud(a.in);
  const opfr::NormalEstimate est = opfr::estimate_normals(cloud, a.k, thread_budget(a));
  if (!est.undefined.empty()) {
    std::cerr << "error: normal undefined at " << est.undefined.size() << " points (first: " << est.undefined.front()
              << "); the neighborhood is collinear or coincident\n";
    return kNumeric;
  }
  const opfr::PointCloud out(std::vector<opfr::Vec3>(cloud.points().begin(), cloud.points().end()), est.normals);
  opfr::write_cloud(a.out, out);
  return kOk;
}

void print_report(const opfr::BenchReport& r) {
  std::printf("BENCH pipeline=%s n=%zu reps=%zu median_ms=%.6f speedup=%.4f", r.pipeline.c_str(), r.cloud_size,
              r.reps, r.median_ms, r.speedup);
  for (const auto& [key, value] : r.config) std::printf(" %s=%s", key.c_str(), value.c_str());
  std::printf(" times_ms=");
  for (std::size_t i = 0; i < r.times_ms.size(); ++i) std::printf("%s%.6f", i ? "," : "", r.times_ms[i]);
  std::printf("\n");
}

int run_bench(const Args& a) {
  opfr::ShapeSpec spec;
  spec.kind = opfr::shape_kind_from_string(a.shape);
  spec.count = a.n;
  spec.seed = a.seed;
  spec.validate();
  const opfr::PointCloud cloud = opfr::generate(spec).cloud;

  opfr::BenchOptions opt;
  opt.reps = a.reps;
  opt.threads = thread_budget(a);
  opt.sampling = sampling_from(a);
  opt.pfh.k = a.k;
  opt.pfh.bins_per_angle = a.bins;
  if (!a.mlp_params.empty()) opt.mlp = opfr::load_params(a.mlp_params);
  const auto [opfr_report, pfh_report] = opfr::bench_pipelines(cloud, opt);

  std::printf("%-10s %8s %6s %14s %10s\n", "pipeline", "n", "reps", "median [ms]", "speedup");
  for (const auto* r : {&opfr_report, &pfh_report}) {
    std::printf("%-10s %8zu %6zu %14.4f %10.2f\n", r->pipeline.c_str(), r->cloud_size, r->reps, r->median_ms,
                r->speedup);
  }
  print_report(opfr_report);
  print_report(pfh_report);
  return kOk;
}

int run_train_toy(const Args& a) {
  static const std::map<std::string, opfr::Pooling> poolings{
      {"sum", opfr::Pooling::sum}, {"avg", opfr::Pooling::avg}, {"max", opfr::Pooling::max}};
  static const std::map<std::string, opfr::FeatureSet> sets{{"full", opfr::FeatureSet::full},
                                                            {"rel_pos_only", opfr::FeatureSet::rel_pos_only},
                                                            {"no_curvature", opfr::FeatureSet::no_curvature}};
  opfr::ToyTrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.pooling = poolings.at(a.pooling);
  cfg.features = sets.at(a.feature_set);

  const auto classes = opfr::default_toy_classes();
  const opfr::ToyDataset data = opfr::make_toy_dataset(classes, a.per_class, 0.8, a.seed);
  const opfr::TrainResult result = opfr::train_toy(data, cfg, [](const opfr::EpochMetrics& m) {
    std::printf("epoch %3zu lr=%.6f loss=%.6f train_acc=%.4f test_acc=%.4f\n", m.epoch, m.learning_rate,
                m.train_loss, m.train_accuracy, m.test_accuracy);
    std::fflush(stdout);
  });
  std::printf("final test accuracy: %.4f\n", result.final_test_accuracy);
  if (!a.out.empty()) opfr::save_params(a.out, result.params);
  return kOk;
}

int run_synth(const Args& a) {
  opfr::ShapeSpec spec;
  spec.kind = opfr::shape_kind_from_string(a.kind);
  spec.radius = a.radius;
  spec.count = a.n;
  spec.sigma = a.sigma;
  spec.seed = a.seed;
  spec.dihedral_deg = a.dihedral;
  spec.extent = a.extent;
  spec.validate();
  opfr::write_cloud(a.out, opfr::generate(spec).cloud);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Keep the multi-megabyte activation buffers on the heap instead of fresh mmap pages per batch.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  Args a;
  CLI::App app{"Point cloud local features: learned pair features and a PFH baseline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--threads", a.threads, "worker threads (default: OPFR_THREADS or 1)")->check(CLI::PositiveNumber);

  const std::vector<std::string> anchors{"centroid", "interest"};
  const std::vector<std::string> domains{"cloud", "k1set"};

  auto* features = app.add_subcommand("features", "per-point raw pair features or learned vectors");
  features->add_option("in", a.in, "input cloud (.xyz/.ply/.off)")->required()->check(CLI::ExistingFile);
  features->add_option("--out", a.out, "output CSV table")->required();
  features->add_option("--k1", a.k1, "neighborhood size")->check(CLI::PositiveNumber);
  features->add_option("--k2", a.k2, "cluster centroids")->check(CLI::PositiveNumber);
  features->add_option("--k3", a.k3, "neighbors per centroid")->check(CLI::PositiveNumber);
  features->add_option("--pair-anchor", a.anchor, "centroid|interest")->check(CLI::IsMember(anchors));
  features->add_option("--k3-domain", a.k3_domain, "cloud|k1set")->check(CLI::IsMember(domains));
  features->add_flag("--no-self", a.no_self, "exclude the interest point from its own neighborhood");
  auto* raw = features->add_flag("--raw", a.raw, "export 9 channels per pair (default)");
  auto* learned = features->add_option("--opfr", a.opfr_params, "parameter file; export pooled vectors");
  raw->excludes(learned);
  learned->check(CLI::ExistingFile);

  auto* pfh = app.add_subcommand("pfh", "PFH descriptors with estimated normals");
  pfh->add_option("in", a.in)->required()->check(CLI::ExistingFile);
  pfh->add_option("--out", a.out)->required();
  pfh->add_option("--k", a.k, "neighbors per descriptor")->check(CLI::PositiveNumber);
  pfh->add_option("--bins", a.bins, "bins per angle")->check(CLI::PositiveNumber);
  pfh->add_flag("--normalized", a.normalized, "divide histograms by the scored pair count");

  auto* normals = app.add_subcommand("normals", "PCA normal estimation");
  normals->add_option("in", a.in)->required()->check(CLI::ExistingFile);
  normals->add_option("--out", a.out)->required();
  normals->add_option("--k", a.k, "neighbors including the point")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "time the learned-feature pipeline against PFH");
  bench->add_option("--n", a.n, "cloud size")->check(CLI::PositiveNumber);
  bench->add_option("--reps", a.reps, "repetitions (first is discarded)");
  bench->add_option("--shape", a.shape, "plane|sphere|cylinder|corner");
  bench->add_option("--seed", a.seed);
  bench->add_option("--k", a.k, "PFH neighbors")->check(CLI::PositiveNumber);
  bench->add_option("--bins", a.bins, "PFH bins per angle")->check(CLI::PositiveNumber);
  bench->add_option("--mlp", a.mlp_params, "include an MLP forward pass with these parameters")
      ->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train-toy", "synthetic 4-class shape experiment");
  train->add_option("--epochs", a.epochs)->check(CLI::PositiveNumber);
  train->add_option("--seed", a.seed);
  train->add_option("--out", a.out, "write the trained MLP parameters");
  train->add_option("--pooling", a.pooling, "sum|avg|max")->check(CLI::IsMember({"sum", "avg", "max"}));
  train->add_option("--features", a.feature_set, "full|rel_pos_only|no_curvature")
      ->check(CLI::IsMember({"full", "rel_pos_only", "no_curvature"}));
  train->add_option("--per-class", a.per_class, "samples per class")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "write a synthetic cloud");
  synth->add_option("--kind", a.kind, "plane|sphere|cylinder|corner");
  synth->add_option("--r", a.radius, "radius (sphere, cylinder)");
  synth->add_option("--n", a.n, "point count")->check(CLI::PositiveNumber);
  synth->add_option("--sigma", a.sigma, "Gaussian noise");
  synth->add_option("--seed", a.seed);
  synth->add_option("--dihedral", a.dihedral, "corner angle in degrees");
  synth->add_option("--extent", a.extent, "patch side length");
  synth->add_option("--out", a.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*features) return run_features(a);
    if (*pfh) return run_pfh(a);
    if (*normals) return run_normals(a);
    if (*bench) return run_bench(a);
    if (*train) return run_train_toy(a);
    if (*synth) return run_synth(a);
  } catch (const opfr::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const opfr::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const opfr::Error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}
