#include <doctest.h>

#include <limits>
#include <random>

#include "clidd/detect.hpp"
#include "oracles.hpp"

using namespace clidd;

namespace {

FeatureMapf background(int h, int w) {
  return FeatureMapf::Constant(h, w, 1, -std::numeric_limits<float>::infinity());
}

// Random heatmap; with `levels` > 0 values are quantised so plateaus and ties are common.
FeatureMapf random_heat(std::mt19937_64& rng, int h, int w, int levels) {
  FeatureMapf m = oracle::random_map(rng, h, w, 1, -4.0f, 4.0f);
  if (levels > 0)
    for (Eigen::Index i = 0; i < m.data.size(); ++i) m.data(i) = std::round(m.data(i) * float(levels) / 4.0f);
  return m;
}

}  // namespace

TEST_SUITE("detect") {

TEST_CASE("heatmap has the padded input size") {
  std::mt19937_64 rng(0);
  for (const char* name : {"A48", "S64", "U128"}) {
    const ModelConfig& c = preset(name);
    const Model model = Model::from_store(init_weights(c, 1), c);
    const Pyramid p = backbone_forward(oracle::random_map(rng, 64, 96, 3, 0.0f, 1.0f), model);
    const FeatureMapf heat = detect_forward(p, model);
    CHECK(heat.height == 64);
    CHECK(heat.width == 96);
    CHECK(heat.channels == 1);
    CHECK(heat.data.allFinite());
  }
}

TEST_CASE("zero detector weights give a zero heatmap") {
  const ModelConfig& c = preset("A48");
  WeightStore store = init_weights(c, 2);
  for (auto& t : store.tensors)
    if (t.name.starts_with("detect.")) std::fill(t.data.begin(), t.data.end(), 0.0f);
  std::mt19937_64 rng(3);
  const Pyramid p = backbone_forward(oracle::random_map(rng, 64, 64, 3, 0.0f, 1.0f), store, c);
  const FeatureMapf heat = detect_forward(p, store, c);
  CHECK(heat.height == 64);
  CHECK(heat.data.isZero(0.0f));
}

TEST_CASE("single spike") {
  FeatureMapf heat = background(20, 30);
  heat(7, 11, 0) = 2.5f;
  const KeypointSet kps = nms_topk(heat);
  REQUIRE(kps.size() == 1);
  CHECK(kps[0] == Keypoint{11, 7, 2.5f});
}

TEST_CASE("two spikes 2 px apart at radius 2 keep only the stronger") {
  FeatureMapf heat = background(16, 16);
  heat(5, 5, 0) = 1.0f;
  heat(5, 7, 0) = 3.0f;
  KeypointSet kps = nms_topk(heat, {.radius = 2});
  REQUIRE(kps.size() == 1);
  CHECK(kps[0].x == 7);
  kps = nms_topk(heat, {.radius = 1});
  CHECK(kps.size() == 2);
}

TEST_CASE("top-k picks the largest of well separated maxima") {
  FeatureMapf heat = background(40, 40);
  for (int i = 0; i < 10; ++i) heat(3 + (i / 5) * 20, 3 + (i % 5) * 8, 0) = float(i);
  const KeypointSet kps = nms_topk(heat, {.radius = 2, .top_k = 3});
  REQUIRE(kps.size() == 3);
  CHECK(kps[0].score == 9.0f);
  CHECK(kps[1].score == 8.0f);
  CHECK(kps[2].score == 7.0f);
}

TEST_CASE("plateaus are not strict maxima, radius 0 keeps every cell") {
  const FeatureMapf flat = FeatureMapf::Constant(8, 8, 1, 1.0f);
  CHECK(nms_topk(flat, {.radius = 1}).empty());
  const KeypointSet all = nms_topk(flat, {.radius = 0, .top_k = 1000});
  REQUIRE(all.size() == 64);
  // Equal scores are ordered by y, then x.
  CHECK(all[0] == Keypoint{0, 0, 1.0f});
  CHECK(all[1] == Keypoint{1, 0, 1.0f});
  CHECK(all[8] == Keypoint{0, 1, 1.0f});
}

TEST_CASE("nms_topk equals the pairwise suppression oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const FeatureMapf heat = random_heat(rng, 64, 64, trial % 2 == 0 ? 0 : 6);
    for (int r = 0; r <= 3; ++r) {
      for (int k : {5000, 37}) {
        CAPTURE(trial);
        CAPTURE(r);
        const KeypointSet got = nms_topk(heat, {.radius = r, .top_k = k});
        const auto want = oracle::nms(heat, r, k, 64, 64);
        REQUIRE(got.size() == want.size());
        bool same = true;
        for (std::size_t i = 0; i < got.size(); ++i)
          same = same && got[i].x == want[i].x && got[i].y == want[i].y && got[i].score == want[i].score;
        CHECK(same);
      }
    }
  }
}

TEST_CASE("survivors are separated, sorted and carry their heatmap value") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMapf heat = random_heat(rng, 48, 56, 0);
    for (int r = 1; r <= 3; ++r) {
      const KeypointSet kps = nms_topk(heat, {.radius = r, .top_k = 10000});
      for (std::size_t i = 0; i < kps.size(); ++i) {
        CHECK(kps[i].score == heat(kps[i].y, kps[i].x, 0));
        if (i > 0) CHECK(kps[i - 1].score >= kps[i].score);
        for (std::size_t j = i + 1; j < kps.size(); ++j)
          CHECK(std::max(std::abs(kps[i].x - kps[j].x), std::abs(kps[i].y - kps[j].y)) > r);
      }
    }
  }
}

TEST_CASE("keypoints stay inside the valid region") {
  std::mt19937_64 rng(6);
  const FeatureMapf heat = random_heat(rng, 64, 64, 0);
  const KeypointSet kps = nms_topk(heat, {.radius = 1, .top_k = 10000, .valid_width = 41, .valid_height = 33});
  CHECK_FALSE(kps.empty());
  for (const auto& k : kps) {
    CHECK(k.x < 41);
    CHECK(k.y < 33);
  }
  const auto want = oracle::nms(heat, 1, 10000, 41, 33);
  CHECK(kps.size() == want.size());
}

TEST_CASE("invalid options") {
  const FeatureMapf heat(4, 4, 1);
  CHECK_THROWS_AS(nms_topk(heat, {.radius = -1}), ConfigError);
  CHECK_THROWS_AS(nms_topk(heat, {.top_k = 0}), ConfigError);
}

}  // TEST_SUITE
