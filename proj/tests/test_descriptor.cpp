#include <doctest.h>

#include <random>

#include "clidd/descriptor.hpp"
#include "clidd/parallel.hpp"
#include "oracles.hpp"

using namespace clidd;

namespace {

struct Fixture {
  ModelConfig config;
  WeightStore store;
  Model model;
  Pyramid pyramid;
};

Fixture make_fixture(const char* name, std::uint64_t seed, const InitOptions& init = {}, int h = 64, int w = 96) {
  const ModelConfig& c = preset(name);
  WeightStore store = init_weights(c, seed, init);
  Model model = Model::from_store(store, c);
  std::mt19937_64 rng(seed + 100);
  Pyramid p = backbone_forward(oracle::random_map(rng, h, w, 3, 0.0f, 1.0f), model);
  return {c, std::move(store), std::move(model), std::move(p)};
}

KeypointSet random_keypoints(std::mt19937_64& rng, int n, int h, int w) {
  std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
  KeypointSet kps(static_cast<std::size_t>(n));
  for (auto& k : kps) k = {ux(rng), uy(rng), 0.0f};
  return kps;
}

// Descriptor of one keypoint computed from the raw weight tensors in double precision.
std::vector<double> reference_descriptor(const Fixture& f, const Keypoint& kp) {
  const ModelConfig& c = f.config;
  const int c_sum = c.c_sum(), m = c.m;
  std::vector<double> embedding;
  std::array<double, 3> lx{}, ly{};
  for (int l = 0; l < 3; ++l) {
    const double stride = kLevelStrides[std::size_t(l)];
    lx[std::size_t(l)] = (kp.x + 0.5) / stride - 0.5;
    ly[std::size_t(l)] = (kp.y + 0.5) / stride - 0.5;
    const auto v = oracle::bilinear(f.pyramid.level(l), lx[std::size_t(l)], ly[std::size_t(l)]);
    embedding.insert(embedding.end(), v.begin(), v.end());
  }
  const auto& ow = f.store.at("desc.0.offset.weight").data;
  const auto& ob = f.store.at("desc.0.offset.bias").data;
  std::vector<double> offsets(std::size_t(6 * m));
  for (int o = 0; o < 6 * m; ++o) {
    double acc = ob[std::size_t(o)];
    for (int k = 0; k < c_sum; ++k) acc += double(ow[std::size_t(o * c_sum + k)]) * embedding[std::size_t(k)];
    offsets[std::size_t(o)] = acc;
  }
  std::vector<double> samples;
  for (int s = 0; s < m; ++s)
    for (int l = 0; l < 3; ++l) {
      const double x = lx[std::size_t(l)] + offsets[std::size_t((l * m + s) * 2)];
      const double y = ly[std::size_t(l)] + offsets[std::size_t((l * m + s) * 2 + 1)];
      // The library works in float coordinates; round the same way before interpolating.
      const auto v = oracle::bilinear(f.pyramid.level(l), float(x), float(y));
      samples.insert(samples.end(), v.begin(), v.end());
    }
  const auto& aw = f.store.at("desc.0.aggregate.weight").data;
  const auto& ab = f.store.at("desc.0.aggregate.bias").data;
  std::vector<double> d(std::size_t(c.c_desc));
  double norm = 0;
  for (int o = 0; o < c.c_desc; ++o) {
    double acc = ab[std::size_t(o)];
    for (std::size_t k = 0; k < samples.size(); ++k) acc += double(aw[std::size_t(o) * samples.size() + k]) * samples[k];
    d[std::size_t(o)] = acc;
    norm += acc * acc;
  }
  for (auto& v : d) v /= std::sqrt(norm);
  return d;
}

float max_abs_diff(const RowMatrixf& a, const RowMatrixf& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("descriptor") {

TEST_CASE("level coordinate mapping aligns cell centres") {
  CHECK(level_coordinate(0.0f, 2) == doctest::Approx(-0.25f));
  CHECK(level_coordinate(1.0f, 2) == doctest::Approx(0.25f));
  CHECK(level_coordinate(3.5f, 8) == doctest::Approx(0.0f));
  CHECK(level_coordinate(15.5f, 32) == doctest::Approx(0.0f));
}

TEST_CASE("zero offset predictor gives zero offsets") {
  const Fixture f = make_fixture("T64", 1, {.offsets = OffsetInit::Zero});
  std::mt19937_64 rng(1);
  const OffsetSet off = predict_offsets(f.pyramid, random_keypoints(rng, 50, 64, 96), f.model);
  CHECK(off.samples == f.config.m);
  CHECK(off.values.rows() == 50);
  CHECK(off.values.cols() == 6 * f.config.m);
  CHECK(off.values.isZero(0.0f));
}

TEST_CASE("identical keypoints give identical offsets and descriptors") {
  const Fixture f = make_fixture("N64", 2, {.offsets = OffsetInit::Random});
  const KeypointSet kps = {{10, 20, 0}, {33, 5, 0}, {10, 20, 0}};
  const OffsetSet off = predict_offsets(f.pyramid, kps, f.model);
  CHECK(off.values.row(0) == off.values.row(2));
  CHECK(off.values.row(0) != off.values.row(1));
  for (auto path : {DescribePath::Naive, DescribePath::Fused}) {
    const RowMatrixf d = describe(f.pyramid, kps, f.model, path);
    CHECK(d.row(0) == d.row(2));
  }
}

TEST_CASE("constant pyramid with zero offsets gives identical descriptors") {
  Fixture f = make_fixture("A48", 3, {.offsets = OffsetInit::Zero, .zero_sum_aggregation = false});
  for (int l = 0; l < 3; ++l) f.pyramid.levels[std::size_t(l)].data.setConstant(0.5f + 0.25f * float(l));
  std::mt19937_64 rng(3);
  const KeypointSet kps = random_keypoints(rng, 40, 64, 96);
  const RowMatrixf d = describe(f.pyramid, kps, f.model, DescribePath::Naive);
  for (Eigen::Index i = 1; i < d.rows(); ++i) CHECK(d.row(i).isApprox(d.row(0), 1e-6f));
}

TEST_CASE("descriptor rows have unit norm") {
  const Fixture f = make_fixture("S64", 4);
  std::mt19937_64 rng(4);
  const KeypointSet one = {{17, 9, 0}};
  for (auto path : {DescribePath::Naive, DescribePath::Fused}) {
    const RowMatrixf d1 = describe(f.pyramid, one, f.model, path);
    REQUIRE(d1.rows() == 1);
    CHECK(d1.cols() == 64);
    CHECK(d1.row(0).norm() == doctest::Approx(1.0).epsilon(1e-5));
    const RowMatrixf d = describe(f.pyramid, random_keypoints(rng, 300, 64, 96), f.model, path);
    for (Eigen::Index i = 0; i < d.rows(); ++i) CHECK(d.row(i).norm() == doctest::Approx(1.0).epsilon(1e-5));
  }
  CHECK(describe(f.pyramid, {}, f.model, DescribePath::Fused).rows() == 0);
  CHECK(describe(f.pyramid, {}, f.model, DescribePath::Naive).rows() == 0);
}

TEST_CASE("naive path equals a double precision reference built from the raw tensors") {
  for (const char* name : {"A48", "M64", "G128"}) {
    CAPTURE(name);
    const Fixture f = make_fixture(name, 5, {.offsets = OffsetInit::Random});
    std::mt19937_64 rng(5);
    const KeypointSet kps = random_keypoints(rng, 40, 64, 96);
    const RowMatrixf d = describe(f.pyramid, kps, f.model, DescribePath::Naive);
    double worst = 0;
    for (std::size_t i = 0; i < kps.size(); ++i) {
      const auto want = reference_descriptor(f, kps[i]);
      for (std::size_t j = 0; j < want.size(); ++j)
        worst = std::max(worst, std::abs(double(d(Eigen::Index(i), Eigen::Index(j))) - want[j]));
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("zero offsets degenerate to one cross-layer read projected by the summed sample weights") {
  const Fixture f = make_fixture("T64", 6, {.offsets = OffsetInit::Zero, .zero_sum_aggregation = false});
  const ModelConfig& c = f.config;
  const int c_sum = c.c_sum();
  const auto& aw = f.store.at("desc.0.aggregate.weight").data;
  const auto& ab = f.store.at("desc.0.aggregate.bias").data;
  std::mt19937_64 rng(6);
  const KeypointSet kps = random_keypoints(rng, 30, 64, 96);
  const RowMatrixf d = describe(f.pyramid, kps, f.model, DescribePath::Fused, 7);
  for (std::size_t i = 0; i < kps.size(); ++i) {
    std::vector<double> e;
    for (int l = 0; l < 3; ++l) {
      const double s = kLevelStrides[std::size_t(l)];
      const auto v = oracle::bilinear(f.pyramid.level(l), (kps[i].x + 0.5) / s - 0.5, (kps[i].y + 0.5) / s - 0.5);
      e.insert(e.end(), v.begin(), v.end());
    }
    Eigen::VectorXd want(c.c_desc);
    for (int o = 0; o < c.c_desc; ++o) {
      double acc = ab[std::size_t(o)];
      for (int ch = 0; ch < c_sum; ++ch) {
        double w = 0;
        for (int s = 0; s < c.m; ++s) w += aw[std::size_t(o * c.m * c_sum + s * c_sum + ch)];
        acc += w * e[std::size_t(ch)];
      }
      want(o) = acc;
    }
    want.normalize();
    CHECK((d.row(Eigen::Index(i)).cast<double>().transpose() - want).cwiseAbs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("fused path agrees with the naive path") {
  const Fixture f = make_fixture("A48", 7, {.offsets = OffsetInit::Random}, 128, 160);
  std::mt19937_64 rng(7);
  const KeypointSet kps = random_keypoints(rng, 1024, 128, 160);
  const RowMatrixf naive = describe(f.pyramid, kps, f.model, DescribePath::Naive);
  for (int block : {1, 17, 64, 1000, 1024, 5000}) {
    CAPTURE(block);
    const RowMatrixf fused = describe_fused(f.pyramid, kps, f.model, block);
    CHECK(max_abs_diff(fused, naive) <= 1e-4f);
  }
  // Same per-element schedule: block = N reproduces the naive bits.
  CHECK(describe_fused(f.pyramid, kps, f.model, 1024) == naive);
}

TEST_CASE("scratch accounting") {
  const Fixture f = make_fixture("A48", 8, {.offsets = OffsetInit::Random}, 128, 128);
  const ModelConfig& c = f.config;
  const std::int64_t per_fused = c.c_sum() + 6 * c.m + 4;  // widest level of A48 has 4 channels
  std::mt19937_64 rng(8);
  const KeypointSet big = random_keypoints(rng, 16384, 128, 128);
  const KeypointSet small(big.begin(), big.begin() + 1024);
  parallel::ScopedWorkers single(1);

  ScratchProbe fused_small, fused_big, naive_small, naive_big;
  describe(f.pyramid, small, f.model, DescribePath::Fused, 64, &fused_small);
  describe(f.pyramid, big, f.model, DescribePath::Fused, 64, &fused_big);
  describe(f.pyramid, small, f.model, DescribePath::Naive, 64, &naive_small);
  describe(f.pyramid, big, f.model, DescribePath::Naive, 64, &naive_big);

  CHECK(fused_small.peak() == 64 * per_fused);
  CHECK(fused_big.peak() == fused_small.peak());
  CHECK(fused_big.peak() <= 64 * c.m * c.c_sum() + 64 * per_fused);
  CHECK(naive_big.peak() >= 16384 * c.m * c.c_sum());
  CHECK(naive_big.peak() == 16 * naive_small.peak());
  for (const auto* p : {&fused_small, &fused_big, &naive_small, &naive_big}) CHECK(p->current() == 0);
}

TEST_CASE("results do not depend on the worker count") {
  const Fixture f = make_fixture("M64", 9, {.offsets = OffsetInit::Random});
  std::mt19937_64 rng(9);
  const KeypointSet kps = random_keypoints(rng, 500, 64, 96);
  for (auto path : {DescribePath::Naive, DescribePath::Fused}) {
    RowMatrixf one, four;
    {
      parallel::ScopedWorkers w(1);
      one = describe(f.pyramid, kps, f.model, path, 17);
    }
    {
      parallel::ScopedWorkers w(4);
      four = describe(f.pyramid, kps, f.model, path, 17);
    }
    CHECK(one == four);
  }
}

TEST_CASE("invalid arguments") {
  const Fixture f = make_fixture("A48", 10);
  const KeypointSet kps = {{1, 1, 0}};
  CHECK_THROWS_AS(describe_fused(f.pyramid, kps, f.model, 0), ConfigError);
  const Fixture other = make_fixture("N64", 10);
  CHECK_THROWS_AS(describe_fused(other.pyramid, kps, f.model), ConfigError);
  OffsetSet wrong = predict_offsets(f.pyramid, {{1, 1, 0}, {2, 2, 0}}, f.model);
  CHECK_THROWS_AS(describe_naive(f.pyramid, kps, wrong, f.model), ConfigError);
}

}  // TEST_SUITE
