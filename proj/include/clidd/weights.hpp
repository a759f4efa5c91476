#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "clidd/config.hpp"
#include "clidd/errors.hpp"

namespace clidd {

/// Named parameter tensor; `data` is row-major over `shape`.
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  bool operator==(const NamedTensor&) const = default;
};

/// Ordered parameter collection for one config.
struct WeightStore {
  std::string config_name;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
  NamedTensor* find(std::string_view name);
  const NamedTensor& at(std::string_view name) const;
  std::int64_t scalar_count() const;

  bool operator==(const WeightStore&) const = default;
};

/// Offset predictor at initialisation.
enum class OffsetInit : std::uint8_t {
  Zero,     // every sample reads the keypoint itself
  Pattern,  // zero weights, bias is a fixed random sampling layout
  Random,   // fan-in scaled weights and bias like every other layer
};

struct InitOptions {
  OffsetInit offsets = OffsetInit::Pattern;
  /// Half-width of the Pattern layout in image pixels; each level gets it in its own grid units.
  float pattern_radius = 8.0f;
  /// Centre the aggregation weights over the M samples of each input channel, so a feature
  /// field that is constant around a keypoint contributes nothing but the bias.
  bool zero_sum_aggregation = true;
};

/// Deterministic fan-in scaled uniform initialisation. Weights draw from
/// U(-sqrt(6 / fan_in), sqrt(6 / fan_in)), biases from U(-1 / sqrt(fan_in), 1 / sqrt(fan_in)).
/// The description head is then adjusted per `options`; the defaults give untrained models
/// descriptors that separate keypoints (ReLU features share a large positive mean, which
/// otherwise dominates every descriptor).
WeightStore init_weights(const ModelConfig& config, std::uint64_t seed, const InitOptions& options = {});

/// Checks names, order and shapes against architecture(config); throws WeightFormatError
/// with kind ShapeMismatch on any difference.
void validate_weights(const WeightStore& store, const ModelConfig& config);

class WeightFormatError : public FormatError {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, ShapeMismatch, UnknownConfig, Io };

  WeightFormatError(Kind kind, const std::string& message) : FormatError(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kWeightFormatVersion = 1;

// Weight file layout, little endian, no padding:
//   "CLDW" | u32 version | u8 config id | u32 tensor count
//   per tensor: u16 name length | name bytes | u8 rank | rank x u32 dims | f32 data
void write_weights(std::ostream& out, const WeightStore& store);
WeightStore read_weights(std::istream& in);
void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace clidd
