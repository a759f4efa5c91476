#pragma once

#include <optional>
#include <vector>

#include "clidd/config.hpp"
#include "clidd/tensor.hpp"
#include "clidd/weights.hpp"

namespace clidd {

struct ResidualBlock {
  Kernel2Df conv1;
  Kernel2Df conv2;
  std::optional<Kernel2Df> projection;
};

/// Typed view of a WeightStore for one config, ready for inference.
struct Model {
  ModelConfig config;

  Kernel2Df stem_conv1;  // 4x4, stride 2, padding 1
  Kernel2Df stem_conv2;  // 3x3
  ResidualBlock stage1;
  std::vector<ResidualBlock> stage2;
  std::vector<ResidualBlock> stage3;

  std::array<Kernel2Df, 3> detect_compress;
  Kernel2Df detect_conv1;
  Kernel2Df detect_conv2;

  AffineMapf offset_predictor;  // C_sum -> 6M
  AffineMapf aggregator;        // M * C_sum -> C_desc

  // Transposed copies of the description-head matrices so each input feature owns a
  // contiguous output row.
  RowMatrixf offset_weights_t;     // C_sum x 6M
  RowMatrixf aggregate_weights_t;  // (M * C_sum) x C_desc

  /// Validates `store` against `config`: ConfigError if it belongs to another preset,
  /// WeightFormatError if a tensor is missing or misshapen.
  static Model from_store(const WeightStore& store, const ModelConfig& config);
};

}  // namespace clidd
