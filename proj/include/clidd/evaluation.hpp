#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "clidd/geometry.hpp"
#include "clidd/matcher.hpp"
#include "clidd/pipeline.hpp"

namespace clidd {

struct NamedImage {
  std::string name;
  FeatureMapf image;
};

struct SyntheticEvalOptions {
  ExtractOptions extract;
  SynthOptions synth;
  DualSoftmaxOptions match;
  RansacOptions ransac;
  std::uint64_t seed = 0;
};

struct PairResult {
  std::string image;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  int keypoints_a = 0;
  int keypoints_b = 0;
  int matches = 0;
  int inliers = 0;
  double corner_error = 0.0;  // NaN when estimation failed
};

struct SyntheticEvalResult {
  std::vector<PairResult> pairs;
  EvalReport report;
};

/// Per image: warp with a random homography, extract both views, match, fit a homography
/// and score its corners against the ground truth. Estimation failures are recorded per
/// pair and never abort the run.
SyntheticEvalResult run_synthetic_eval(const std::vector<NamedImage>& images, const Model& model,
                                       const SyntheticEvalOptions& options);

/// `count` seeded value-noise images of 480 x 640.
std::vector<NamedImage> procedural_images(int count, std::uint64_t seed);

void write_eval_csv(std::ostream& out, const SyntheticEvalResult& result);

}  // namespace clidd
