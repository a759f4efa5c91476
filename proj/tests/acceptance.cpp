// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails. Each
// criterion also has a wall-time budget; exceeding it is a failure.

#include <sys/wait.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "clidd/bench.hpp"
#include "clidd/config.hpp"
#include "clidd/evaluation.hpp"
#include "clidd/image_io.hpp"
#include "clidd/losses.hpp"
#include "clidd/matcher.hpp"
#include "clidd/pipeline.hpp"
#include "oracles.hpp"

using namespace clidd;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------------------

void params(Outcome& o) {
  int matched = 0, columns = 0;
  for (const PublishedCounts& p : published_counts()) {
    const ParamCount c = param_count(preset(p.name));
    const std::pair<std::int64_t, std::string_view> cols[] = {
        {c.backbone, p.backbone}, {c.detect, p.detect}, {c.desc, p.desc}, {c.total, p.total}};
    for (const auto& [count, shown] : cols) {
      ++columns;
      if (round_matches(count, shown)) {
        ++matched;
      } else {
        o.require(false, std::string(p.name) + " " + std::to_string(count) + " vs " + std::string(shown));
      }
    }
  }
  o.require(published_counts().size() == 9, "nine presets");
  const std::int64_t a48 = param_count(preset("A48")).total;
  o.require(a48 == 4252, "A48 total");
  o.detail << matched << "/" << columns << " columns round-match, A48 total " << a48;
}

void flops(Outcome& o) {
  const double g = double(flops_estimate(preset("A48"), 480, 640, 1024)) / 1e9;
  o.require(g >= 0.04 && g <= 0.12, "within 50% of 0.08 G");
  o.detail << "A48 480x640 N=1024: " << g << " G (1 MAC = 1 FLOP)";
}

KeypointSet random_keypoints(std::mt19937_64& rng, int n, int x0, int x1, int y0, int y1) {
  std::uniform_int_distribution<int> ux(x0, x1 - 1), uy(y0, y1 - 1);
  KeypointSet kps(static_cast<std::size_t>(n));
  for (auto& k : kps) k = {ux(rng), uy(rng), 1.0f};
  return kps;
}

void fusion_correctness(Outcome& o) {
  double worst = 0;
  int cases = 0;
  for (const ModelConfig& cfg : presets()) {
    for (std::uint64_t seed : {0, 1, 2}) {
      const Model model = Model::from_store(init_weights(cfg, seed, {.offsets = OffsetInit::Random}), cfg);
      const Pyramid pyramid = backbone_forward(procedural_image(128, 128, seed), model);
      std::mt19937_64 rng(seed);
      for (int n : {16, 1024, 4096}) {
        const KeypointSet kps = random_keypoints(rng, n, 0, 128, 0, 128);
        const RowMatrixf naive = describe(pyramid, kps, model, DescribePath::Naive);
        for (int block : {1, 17, 64, n}) {
          const RowMatrixf fused = describe(pyramid, kps, model, DescribePath::Fused, block);
          const double d = (fused - naive).cwiseAbs().maxCoeff();
          worst = std::max(worst, d);
          ++cases;
          if (d > 1e-4)
            o.require(false, cfg.name + " seed " + std::to_string(seed) + " N " + std::to_string(n) + " block " +
                                 std::to_string(block));
        }
      }
    }
  }
  o.detail << cases << " cases, max |fused - naive| = " << worst;
}

void fusion_efficiency(Outcome& o) {
  BenchOptions opt;
  opt.configs = {"U128"};
  opt.keypoints = {1024, 2048, 4096};
  opt.blocks = {kDefaultBlock};
  opt.repeats = 3;
  const std::vector<BenchRecord> records = run_bench(opt);
  auto get = [&](DescribePath path, int n) -> const BenchRecord& {
    for (const auto& r : records)
      if (r.path == path && r.n_keypoints == n) return r;
    throw std::logic_error("missing bench record");
  };
  const BenchRecord& naive = get(DescribePath::Naive, 4096);
  const BenchRecord& fused = get(DescribePath::Fused, 4096);
  o.require(fused.wall_ms < naive.wall_ms, "fused faster than naive at N=4096");
  o.require(fused.checksum == naive.checksum, "identical descriptor bytes");
  for (int n : {1024, 2048}) {
    o.require(get(DescribePath::Fused, n).peak_scratch == fused.peak_scratch, "fused scratch independent of N");
    o.require(naive.peak_scratch * n == get(DescribePath::Naive, n).peak_scratch * 4096, "naive scratch prop. to N");
  }
  o.detail << "U128 N=4096 fused " << fused.wall_ms << " ms vs naive " << naive.wall_ms << " ms; scratch fused "
           << fused.peak_scratch << " (N=1024.." << 4096 << "), naive " << get(DescribePath::Naive, 1024).peak_scratch
           << " -> " << naive.peak_scratch;
}

// ---------------------------------------------------------------------------------------

void oracle_equivalences(Outcome& o) {
  std::mt19937_64 rng(2024);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  constexpr int kInstances = 100;
  double conv_err = 0, pool_err = 0, bil_err = 0, sim_err = 0;
  int shuffle_bad = 0, nms_bad = 0;

  for (int t = 0; t < kInstances; ++t) {
    const int k = std::array{1, 3, 4}[std::size_t(pick(0, 2))];
    const int stride = pick(1, 2), pad = pick(0, 1);
    const FeatureMapf in = oracle::random_map(rng, pick(k, 20), pick(k, 20), pick(1, 8));
    const Kernel2Df kernel = oracle::random_kernel(rng, pick(1, 8), in.channels, k, k);
    int oh = 0, ow = 0;
    const std::vector<double> want = oracle::conv2d(in, kernel, stride, pad, oh, ow);
    const FeatureMapf got = conv2d(in, kernel, stride, pad);
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < want.size(); ++i) {
      diff = std::max(diff, std::abs(double(got.data(Eigen::Index(i))) - want[i]));
      scale = std::max(scale, std::abs(want[i]));
    }
    conv_err = std::max(conv_err, diff / scale);
  }

  for (int t = 0; t < kInstances; ++t) {
    const int f = std::array{1, 2, 4, 8}[std::size_t(pick(0, 3))];
    const FeatureMapf in = oracle::random_map(rng, f * pick(1, 6), f * pick(1, 6), pick(1, 5));
    const FeatureMapf got = avg_pool(in, f);
    for (int y = 0; y < got.height; ++y)
      for (int x = 0; x < got.width; ++x)
        for (int c = 0; c < in.channels; ++c) {
          double sum = 0, mag = 0;
          for (int dy = 0; dy < f; ++dy)
            for (int dx = 0; dx < f; ++dx) {
              sum += in(y * f + dy, x * f + dx, c);
              mag += std::abs(in(y * f + dy, x * f + dx, c));
            }
          pool_err = std::max(pool_err, std::abs(got(y, x, c) - sum / (f * f)) / std::max(mag / (f * f), 1e-30));
        }
  }

  for (int t = 0; t < kInstances; ++t) {
    const int r = pick(1, 4);
    const FeatureMapf in = oracle::random_map(rng, pick(1, 7), pick(1, 7), r * r * pick(1, 4));
    const FeatureMapf got = pixel_shuffle(in, r);
    bool ok = got.height == r * in.height && got.width == r * in.width && got.channels == in.channels / (r * r);
    for (int y = 0; ok && y < in.height; ++y)
      for (int x = 0; x < in.width; ++x)
        for (int c = 0; c < got.channels; ++c)
          for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx)
              ok = ok && got(r * y + dy, r * x + dx, c) == in(y, x, c * r * r + dy * r + dx);
    shuffle_bad += !ok;
  }

  for (int t = 0; t < kInstances; ++t) {
    FeatureMapf heat = oracle::random_map(rng, pick(8, 40), pick(8, 40), 1);
    if (t % 2 == 0)
      for (Eigen::Index i = 0; i < heat.data.size(); ++i) heat.data(i) = std::round(heat.data(i) * 3.0f);
    NmsOptions opt;
    opt.radius = pick(0, 3);
    opt.top_k = t % 3 == 0 ? 7 : 100000;
    opt.valid_width = t % 4 == 0 ? heat.width - 3 : -1;
    opt.valid_height = t % 4 == 0 ? heat.height - 2 : -1;
    const auto want = oracle::nms(heat, opt.radius, opt.top_k, opt.valid_width < 0 ? heat.width : opt.valid_width,
                                  opt.valid_height < 0 ? heat.height : opt.valid_height);
    const KeypointSet got = nms_topk(heat, opt);
    bool ok = got.size() == want.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i)
      ok = got[i].x == want[i].x && got[i].y == want[i].y && got[i].score == want[i].score;
    nms_bad += !ok;
  }

  for (int t = 0; t < kInstances; ++t) {
    const FeatureMapf map = oracle::random_map(rng, pick(1, 12), pick(1, 12), pick(1, 6));
    std::uniform_real_distribution<float> ux(-2.0f, float(map.width) + 1.0f), uy(-2.0f, float(map.height) + 1.0f);
    for (int s = 0; s < 20; ++s) {
      const float x = ux(rng), y = uy(rng);
      const std::vector<double> want = oracle::bilinear(map, x, y);
      const RowVector<float> got = bilinear_sample(map, x, y);
      for (int c = 0; c < map.channels; ++c)
        bil_err = std::max(bil_err, std::abs(double(got(c)) - want[std::size_t(c)]));
    }
  }

  for (int t = 0; t < kInstances; ++t) {
    const int d = pick(2, 128);
    const RowMatrixf a = oracle::random_unit_rows(rng, pick(1, 60), d).cast<float>();
    const RowMatrixf b = oracle::random_unit_rows(rng, pick(1, 60), d).cast<float>();
    const RowMatrixf s = similarity(a, b);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.rows(); ++j) {
        double dot = 0;
        for (int k = 0; k < d; ++k) dot += double(a(i, k)) * double(b(j, k));
        sim_err = std::max(sim_err, std::abs(double(s(i, j)) - dot));
      }
  }

  o.require(conv_err <= 1e-6, "conv2d relative error");
  o.require(pool_err <= 1e-6, "avg_pool relative error");
  o.require(shuffle_bad == 0, "pixel_shuffle layout");
  o.require(nms_bad == 0, "nms_topk selection");
  o.require(bil_err <= 1e-6, "bilinear_sample");
  o.require(sim_err <= 1e-6, "similarity");
  o.detail << kInstances << " instances each; rel err conv " << conv_err << ", pool " << pool_err
           << "; shuffle/nms mismatches " << shuffle_bad << "/" << nms_bad << "; abs err bilinear " << bil_err
           << ", similarity " << sim_err;
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
  return m;
}

void loss_properties(Outcome& o) {
  std::mt19937_64 rng(77);

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  const double ds = dual_softmax_loss(eye, eye, Eigen::VectorXd::Ones(2));
  // Direct evaluation: softmax([1/20, 0]) along rows and columns, diagonal squared.
  const double p = std::exp(0.05) / (std::exp(0.05) + 1.0);
  o.require(std::abs(ds - 1.337) <= 1e-3, "L_DS orthonormal case");
  o.require(std::abs(ds + std::log(p * p)) <= 1e-9, "L_DS direct evaluation");

  int opp_losses = 0;
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + t % 15;
    const Eigen::MatrixXd da = gaussian(rng, 40, d), dl = gaussian(rng, 40, d);
    const Eigen::MatrixXd c = da.transpose() * dl;
    const double best = (c * opp_solve(da, dl)).trace();
    for (int k = 0; k < 1000; ++k)
      if ((c * oracle::random_orthogonal(rng, d)).trace() > best + 1e-9) ++opp_losses;
  }
  o.require(opp_losses == 0, "OPP optimal against random orthogonal matrices");

  double lra_gap = 0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index rows = 64 + 8 * t, target = 8 + 2 * t;
    const Eigen::MatrixXd teacher = gaussian(rng, rows, 128) / std::sqrt(128.0);
    const Eigen::MatrixXd gram = teacher * teacher.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double want = std::sqrt(eig.eigenvalues().head(rows - target).squaredNorm());
    const LowRankTeacher lra = lra_compress(teacher, target);
    const double got = (gram - lra.compressed * lra.compressed.transpose()).norm();
    lra_gap = std::max(lra_gap, std::abs(got - want) / std::max(1.0, want));
  }
  o.require(lra_gap <= 1e-5, "LRA truncation identity");

  int unfold_violations = 0;
  for (int t = 0; t < 100; ++t) {
    const FeatureMapf teacher = oracle::random_map(rng, 16, 24, 1, -3.0f, 3.0f);
    const FeatureMapf student = oracle::random_map(rng, 16, 24, 1, -3.0f, 3.0f);
    unfold_violations += unfold_softmax_loss(teacher, teacher) > unfold_softmax_loss(student, teacher) + 1e-9;
  }
  o.require(unfold_violations == 0, "unfold minimum at student == teacher");

  o.detail << "L_DS " << ds << "; OPP beaten " << opp_losses << " times in 100x1000; LRA gap " << lra_gap
           << "; unfold violations " << unfold_violations << "/100";
}

// ---------------------------------------------------------------------------------------

FeatureMapf crop_columns(const FeatureMapf& image, int x0, int width) {
  FeatureMapf out(image.height, width, image.channels);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < image.channels; ++c) out(y, x, c) = image(y, x0 + x, c);
  return out;
}

void end_to_end(Outcome& o) {
  const ModelConfig& u128 = preset("U128");
  const Model model = Model::from_store(init_weights(u128, 0), u128);

  // Self-matching.
  const Features f = extract_features(procedural_image(480, 640, 11), model);
  const MatchSet self = dual_softmax_match(f.descriptors, f.descriptors);
  int identity = 0;
  for (const Match& m : self.pairs) identity += m.index_a == m.index_b;
  const double rate = double(identity) / double(f.keypoints.size());
  o.require(f.keypoints.size() == 4096, "4096 keypoints");
  o.require(rate >= 0.99, "self-match rate");

  // Shift by 32 pixels: keypoint (x, y) on `image` against (x + 32, y) on `shifted`, where
  // shifted(x + 32) == image(x). Keypoints stay clear of the zero-padded border.
  constexpr int kH = 576, kW = 832, kMargin = 256;
  double shift_err = 0;
  for (const ModelConfig& cfg : presets()) {
    const Model m = Model::from_store(init_weights(cfg, 5), cfg);
    const FeatureMapf wide = procedural_image(kH, kW + 32, 5);
    const FeatureMapf image = crop_columns(wide, 32, kW), shifted = crop_columns(wide, 0, kW);
    std::mt19937_64 rng(5);
    const KeypointSet kps = random_keypoints(rng, 256, kMargin, kW - kMargin - 32, kMargin, kH - kMargin);
    KeypointSet moved = kps;
    for (auto& k : moved) k.x += 32;
    const RowMatrixf a = describe(backbone_forward(image, m), kps, m, DescribePath::Fused);
    const RowMatrixf b = describe(backbone_forward(shifted, m), moved, m, DescribePath::Fused);
    shift_err = std::max(shift_err, double((a - b).cwiseAbs().maxCoeff()));
  }
  o.require(shift_err <= 1e-4, "shift-by-32 consistency");

  // Synthetic evaluation with the identity warp.
  SyntheticEvalOptions still;
  still.synth.max_jitter = 0.0;
  const SyntheticEvalResult zero = run_synthetic_eval(procedural_images(3, 2), model, still);
  o.require(zero.report.mha[0] == 100.0, "zero-jitter MHA@1");

  // 20 procedural pairs at a fixed seed.
  SyntheticEvalOptions opt;
  opt.seed = 0;
  opt.ransac.seed = 0;
  const SyntheticEvalResult twenty = run_synthetic_eval(procedural_images(20, 0), model, opt);
  o.require(twenty.report.pairs == 20, "20 pairs");
  o.require(twenty.report.mha[2] >= 80.0, "20-pair MHA@5");

  o.detail << "U128 self-match " << 100.0 * rate << "% of " << f.keypoints.size() << "; shift-32 max err "
           << shift_err << " (all presets); zero-jitter MHA@1 " << zero.report.mha[0] << "%; 20 pairs MHA@1/3/5 "
           << twenty.report.mha[0] << "/" << twenty.report.mha[1] << "/" << twenty.report.mha[2] << "%";
}

// ---------------------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLIDD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism(Outcome& o) {
  oracle::TempDir dir("acceptance");
  const std::string image = (dir / "scene.ppm").string();
  write_ppm(procedural_image(480, 640, 3), image);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"extract", "extract " + image + " --config G128 --random-seed 2 -o "},
      {"bench", "bench --configs A48 T64 --n-keypoints 512 1024 2048 --block 1 64 --repeats 1 --omit-timing -o "},
      {"eval-synthetic", "eval-synthetic --procedural 3 --config N64 --random-seed 1 --seed 4 -o "},
  };
  int runs = 0;
  for (const auto& [name, args] : commands) {
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "4", "1", "4"}) {
      const auto out = dir / (name + "-" + std::to_string(runs++));
      const int code = run_cli(std::string("--threads ") + threads + " " + args + out.string());
      o.require(code == 0, name + " exit code " + std::to_string(code));
      outputs.push_back(slurp(out));
    }
    bool same = !outputs[0].empty();
    for (const auto& s : outputs) same = same && s == outputs[0];
    o.require(same, name + " byte-identical");
  }
  o.detail << runs << " runs (3 commands x threads {1, 4} x 2)";
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<void(Outcome&)> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"parameter-reproduction", 1.0, params},
      {"flop-estimate", 1.0, flops},
      {"fusion-correctness", 120.0, fusion_correctness},
      {"fusion-efficiency", 120.0, fusion_efficiency},
      {"oracle-equivalences", 60.0, oracle_equivalences},
      {"loss-properties", 60.0, loss_properties},
      {"end-to-end", 300.0, end_to_end},
      {"determinism", 180.0, determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto start = Clock::now();
    try {
      c.check(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= c.budget_s) o.require(false, "runtime budget " + std::to_string(int(c.budget_s)) + " s");
    failures += !o.passed;
    std::printf("%s %-22s %6.1fs  %s\n", o.passed ? "PASS" : "FAIL", c.name, elapsed, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
