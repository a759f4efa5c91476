#pragma once

#include <vector>

#include "clidd/backbone.hpp"

namespace clidd {

struct Keypoint {
  int x = 0;
  int y = 0;
  float score = 0.0f;

  bool operator==(const Keypoint&) const = default;
};

/// Detections sorted by non-increasing score.
using KeypointSet = std::vector<Keypoint>;

/// Full-resolution logit heatmap (H x W x 1 for a padded H x W input).
///
/// Each level is compressed to C_det channels by a 1x1 convolution, levels 2 and 3 are
/// upsampled (nearest) to 1/2 resolution and summed, then ReLU, conv3x3, ReLU, conv3x3 to
/// 4 channels and a pixel shuffle by 2.
FeatureMapf detect_forward(const Pyramid& pyramid, const Model& model);
FeatureMapf detect_forward(const Pyramid& pyramid, const WeightStore& weights, const ModelConfig& config);

struct NmsOptions {
  int radius = 2;  // 0 disables suppression
  int top_k = 4096;
  int valid_width = -1;   // defaults to the heatmap width
  int valid_height = -1;  // defaults to the heatmap height
};

/// Strict local maxima of the (2r+1)^2 window inside the valid region, best `top_k` by score.
/// Ties are broken by y, then x, ascending.
KeypointSet nms_topk(const FeatureMapf& heatmap, const NmsOptions& options = {});

}  // namespace clidd
