#include "clidd/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "clidd/descriptor.hpp"
#include "clidd/detect.hpp"
#include "clidd/model.hpp"
#include "clidd/weights.hpp"
#include "clidd/losses.hpp"

namespace clidd {

namespace {

std::vector<CheckResult> check_param_table(std::span<const ModelConfig> configs) {
  std::vector<CheckResult> out;
  for (const auto& config : configs) {
    const PublishedCounts* published = nullptr;
    for (const auto& row : published_counts())
      if (row.name == config.name) published = &row;
    CheckResult r{config.name + " parameters", false, "no published row"};
    if (published) {
      const ParamCount c = param_count(config);
      r.passed = round_matches(c.backbone, published->backbone) && round_matches(c.detect, published->detect) &&
                 round_matches(c.desc, published->desc) && round_matches(c.total, published->total);
      r.detail = "backbone " + std::to_string(c.backbone) + " detect " + std::to_string(c.detect) + " desc " +
                 std::to_string(c.desc) + " total " + std::to_string(c.total);
      if (config.name == "A48" && c.total != 4252) r.passed = false;
    }
    out.push_back(r);
  }
  return out;
}

CheckResult check_fusion(std::span<const ModelConfig> configs) {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (const auto& config : configs) {
    InitOptions init;
    init.offsets = OffsetInit::Random;
    const Model model = Model::from_store(init_weights(config, 1, init), config);
    FeatureMapf image(64, 64, 3);
    for (Eigen::Index i = 0; i < image.data.size(); ++i) image.data(i) = float(rng() % 1000) / 1000.0f;
    const Pyramid pyramid = backbone_forward(image, model);
    KeypointSet kps;
    for (int i = 0; i < 50; ++i) kps.push_back({int(rng() % 64), int(rng() % 64), 0.0f});
    const RowMatrixf naive = describe(pyramid, kps, model, DescribePath::Naive);
    const RowMatrixf fused = describe(pyramid, kps, model, DescribePath::Fused, 17);
    worst = std::max(worst, double((naive - fused).cwiseAbs().maxCoeff()));
  }
  return {"fused vs naive descriptors", worst <= 1e-4, "max abs diff " + std::to_string(worst)};
}

CheckResult check_nms() {
  std::mt19937_64 rng(11);
  int mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    FeatureMapf heat(24, 24, 1);
    for (Eigen::Index i = 0; i < heat.data.size(); ++i) heat.data(i) = float(rng() % 50);
    const int radius = trial % 4;
    const KeypointSet got = nms_topk(heat, {radius, 10000, -1, -1});
    // Pairwise oracle: a cell survives unless some other cell within the radius is >= it.
    std::size_t expected = 0;
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) {
        bool keep = true;
        for (int yy = 0; yy < 24 && keep; ++yy)
          for (int xx = 0; xx < 24 && keep; ++xx)
            if ((yy != y || xx != x) && std::max(std::abs(yy - y), std::abs(xx - x)) <= radius &&
                heat(yy, xx, 0) >= heat(y, x, 0))
              keep = false;
        expected += keep;
      }
    }
    if (got.size() != expected) ++mismatches;
  }
  return {"nms vs pairwise oracle", mismatches == 0, std::to_string(mismatches) + " mismatching heatmaps"};
}

CheckResult check_procrustes() {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal;
  int failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + trial % 5;
    Eigen::MatrixXd a(30, dim), b(30, dim);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a(i) = normal(rng);
      b(i) = normal(rng);
    }
    const Eigen::MatrixXd omega = opp_solve(a, b);
    const double best = (a.transpose() * b * omega).trace();
    for (int k = 0; k < 200; ++k) {
      Eigen::MatrixXd g(dim, dim);
      for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = normal(rng);
      const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
      if ((a.transpose() * b * q).trace() > best + 1e-9) {
        ++failures;
        break;
      }
    }
  }
  return {"procrustes optimality", failures == 0, std::to_string(failures) + " instances beaten"};
}

}  // namespace

std::vector<CheckResult> run_selfcheck(std::span<const ModelConfig> configs) {
  std::vector<CheckResult> results = check_param_table(configs);
  results.push_back(check_fusion(configs));
  results.push_back(check_nms());
  results.push_back(check_procrustes());
  return results;
}

bool print_selfcheck(std::ostream& out, const std::vector<CheckResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  (" << r.detail << ")\n";
    all = all && r.passed;
  }
  const ParamCount a48 = param_count(preset("A48"));
  out << "A48 total " << a48.total << "\n";
  out << (all ? "selfcheck passed" : "selfcheck FAILED") << "\n";
  return all;
}

}  // namespace clidd
