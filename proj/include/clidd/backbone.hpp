#pragma once

#include "clidd/model.hpp"
#include "clidd/tensor.hpp"

namespace clidd {

/// Feature maps at 1/2, 1/8 and 1/32 of the (padded) input resolution.
struct Pyramid {
  std::array<FeatureMapf, 3> levels;

  const FeatureMapf& level(int l) const { return levels[std::size_t(l)]; }
};

/// RGB image (H x W x 3, values in [0, 1]) to pyramid. H and W must be multiples of 32.
///
/// stem: conv4x4/s2 + ReLU, conv3x3 + ReLU; stage 1: one residual block at C1;
/// stages 2 and 3: average pool by 4, then r_i residual blocks (projection shortcut on the
/// first block when the width changes). Blocks apply ReLU after the residual sum.
Pyramid backbone_forward(const FeatureMapf& image, const Model& model);
Pyramid backbone_forward(const FeatureMapf& image, const WeightStore& weights, const ModelConfig& config);

struct PaddedImage {
  FeatureMapf image;
  int original_height = 0;
  int original_width = 0;
};

/// Replicates the last row and column until both sides are multiples of `multiple`.
PaddedImage pad_to_multiple(const FeatureMapf& image, int multiple = 32);

}  // namespace clidd
