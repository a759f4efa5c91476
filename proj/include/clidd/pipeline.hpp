#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "clidd/descriptor.hpp"
#include "clidd/detect.hpp"
#include "clidd/model.hpp"

namespace clidd {

struct ExtractOptions {
  int top_k = 4096;
  int nms_radius = 2;
  DescribePath path = DescribePath::Fused;
  int block = kDefaultBlock;
};

/// Keypoints in original (unpadded) pixel coordinates with their descriptors.
struct Features {
  int image_width = 0;
  int image_height = 0;
  std::string config_name;
  KeypointSet keypoints;
  RowMatrixf descriptors;  // keypoints.size() x C_desc
};

/// pad -> backbone -> detection heatmap -> NMS/top-k -> description.
Features extract_features(const FeatureMapf& image, const Model& model, const ExtractOptions& options = {});

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

// Feature file layout, little endian, no padding:
//   "CLDF" | u32 version | u32 width | u32 height | u8 name length | config name
//   | u32 count | u32 descriptor dim | count x (f32 x, f32 y, f32 score, dim x f32)
void write_features(std::ostream& out, const Features& features);
Features read_features(std::istream& in);
void save_features(const Features& features, const std::filesystem::path& path);
/// Throws InputError if the file cannot be opened, FormatError if it is malformed.
Features load_features(const std::filesystem::path& path);

}  // namespace clidd
