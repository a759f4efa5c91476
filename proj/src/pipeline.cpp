#include "clidd/pipeline.hpp"

#include <fstream>

#include "clidd/binary_io.hpp"

namespace clidd {

namespace {
constexpr char kMagic[4] = {'C', 'L', 'D', 'F'};
}

Features extract_features(const FeatureMapf& image, const Model& model, const ExtractOptions& options) {
  const PaddedImage padded = pad_to_multiple(image, 32);
  const Pyramid pyramid = backbone_forward(padded.image, model);
  const FeatureMapf heatmap = detect_forward(pyramid, model);

  NmsOptions nms;
  nms.radius = options.nms_radius;
  nms.top_k = options.top_k;
  nms.valid_width = padded.original_width;
  nms.valid_height = padded.original_height;

  Features features;
  features.image_width = image.width;
  features.image_height = image.height;
  features.config_name = model.config.name;
  features.keypoints = nms_topk(heatmap, nms);
  features.descriptors = describe(pyramid, features.keypoints, model, options.path, options.block);
  return features;
}

void write_features(std::ostream& out, const Features& features) {
  if (features.config_name.size() > 255) throw FormatError("config name too long");
  if (Eigen::Index(features.keypoints.size()) != features.descriptors.rows())
    throw FormatError("keypoint and descriptor counts differ");
  out.write(kMagic, 4);
  binary::write_le(out, kFeatureFormatVersion);
  binary::write_le(out, std::uint32_t(features.image_width));
  binary::write_le(out, std::uint32_t(features.image_height));
  binary::write_le(out, std::uint8_t(features.config_name.size()));
  out.write(features.config_name.data(), std::streamsize(features.config_name.size()));
  binary::write_le(out, std::uint32_t(features.keypoints.size()));
  binary::write_le(out, std::uint32_t(features.descriptors.cols()));
  for (std::size_t i = 0; i < features.keypoints.size(); ++i) {
    const auto& kp = features.keypoints[i];
    binary::write_le(out, float(kp.x));
    binary::write_le(out, float(kp.y));
    binary::write_le(out, kp.score);
    binary::write_floats(out, features.descriptors.row(Eigen::Index(i)).data(), std::size_t(features.descriptors.cols()));
  }
  if (!out) throw OutputError("failed to write feature file");
}

Features read_features(std::istream& in) {
  const auto truncated = [] { return FormatError("feature file is truncated"); };
  char magic[4];
  if (!in.read(magic, 4)) throw truncated();
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("not a CLDF feature file");
  std::uint32_t version = 0, width = 0, height = 0, count = 0, dim = 0;
  std::uint8_t name_len = 0;
  if (!binary::read_le(in, version)) throw truncated();
  if (version != kFeatureFormatVersion) throw FormatError("unsupported feature file version " + std::to_string(version));
  if (!binary::read_le(in, width) || !binary::read_le(in, height) || !binary::read_le(in, name_len)) throw truncated();
  Features features;
  features.image_width = int(width);
  features.image_height = int(height);
  features.config_name.resize(name_len);
  if (!in.read(features.config_name.data(), name_len)) throw truncated();
  if (!binary::read_le(in, count) || !binary::read_le(in, dim)) throw truncated();
  if (std::uint64_t(count) * dim > (std::uint64_t(1) << 32)) throw FormatError("feature file header is corrupt");
  features.keypoints.resize(count);
  features.descriptors.resize(count, dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    float x = 0, y = 0, score = 0;
    if (!binary::read_le(in, x) || !binary::read_le(in, y) || !binary::read_le(in, score)) throw truncated();
    features.keypoints[i] = {int(x), int(y), score};
    if (!binary::read_floats(in, features.descriptors.row(i).data(), dim)) throw truncated();
  }
  return features;
}

void save_features(const Features& features, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw OutputError("cannot open " + path.string() + " for writing");
  write_features(out, features);
}

Features load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open feature file " + path.string());
  return read_features(in);
}

}  // namespace clidd
