#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clidd {

/// One network variant: backbone widths and depths, detector width, deformable samples per
/// level and descriptor size.
struct ModelConfig {
  std::string name;
  int c1 = 0;
  int c2 = 0;
  int c3 = 0;
  int r2 = 0;
  int r3 = 0;
  int c_det = 0;
  int m = 0;
  int c_desc = 0;

  int c_sum() const { return c1 + c2 + c3; }
  std::array<int, 3> level_channels() const { return {c1, c2, c3}; }
  /// Offset of each level inside the concatenated C_sum vector.
  std::array<int, 3> level_offsets() const { return {0, c1, c1 + c2}; }
  bool operator==(const ModelConfig&) const = default;
};

/// Downsampling ratio of the three pyramid levels.
inline constexpr std::array<int, 3> kLevelStrides = {2, 8, 32};

/// The nine released variants, in file-format id order (A48 = 0 ... U128 = 8).
std::span<const ModelConfig> presets();
/// Throws ConfigError for unknown names.
const ModelConfig& preset(std::string_view name);
/// Index of a preset in presets(), or -1.
int preset_id(std::string_view name);

enum class Component : std::uint8_t { Backbone, Detect, Desc };

/// Shape and bookkeeping of one parameter tensor. Convolution weights are
/// [out, in, kh, kw]; affine weights [out, in]; biases [out].
struct TensorSpec {
  std::string name;
  std::vector<std::uint32_t> shape;
  Component component = Component::Backbone;
  int fan_in = 0;
  /// Resolution stride the layer runs at (0 for per-keypoint layers).
  int stride = 0;
  bool is_bias = false;

  std::int64_t size() const;
};

/// Every tensor of a config in canonical order. Names follow `stage.block.layer.{weight|bias}`.
std::vector<TensorSpec> architecture(const ModelConfig& config);

struct ParamCount {
  std::int64_t backbone = 0;
  std::int64_t detect = 0;
  std::int64_t desc = 0;
  std::int64_t total = 0;
};

ParamCount param_count(const ModelConfig& config);

/// Multiply-accumulates of a convolution producing out_h x out_w cells (bias excluded).
std::int64_t conv_macs(std::int64_t out_h, std::int64_t out_w, std::int64_t in_c, std::int64_t out_c, int kh,
                       int kw);

/// Forward-pass cost in multiply-accumulates, one MAC counted as one FLOP. Covers every
/// convolution, the description-head affine maps per keypoint, and 4 MACs per channel for
/// each bilinear read (one embedding read plus M deformable reads per level).
std::int64_t flops_estimate(const ModelConfig& config, int height, int width, std::int64_t n_keypoints);

/// Published parameter counts in millions, exactly as displayed (the number of decimals
/// carries the precision).
struct PublishedCounts {
  std::string_view name;
  std::string_view backbone;
  std::string_view detect;
  std::string_view desc;
  std::string_view total;
};

std::span<const PublishedCounts> published_counts();

/// True when `count` parameters, expressed in millions and rounded to the decimals shown in
/// `displayed`, print as `displayed`.
bool round_matches(std::int64_t count, std::string_view displayed);

/// `count` in millions with `decimals` places.
std::string format_millions(std::int64_t count, int decimals);

}  // namespace clidd
