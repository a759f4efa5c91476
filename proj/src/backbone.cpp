#include "clidd/backbone.hpp"

namespace clidd {

namespace {

FeatureMapf residual_forward(const FeatureMapf& input, const ResidualBlock& block) {
  FeatureMapf branch = relu(conv2d(input, block.conv1, 1, 1));
  branch = conv2d(branch, block.conv2, 1, 1);
  if (block.projection) {
    branch.data += conv2d(input, *block.projection, 1, 0).data;
  } else {
    branch.data += input.data;
  }
  return relu(std::move(branch));
}

}  // namespace

Pyramid backbone_forward(const FeatureMapf& image, const Model& model) {
  if (image.channels != 3) throw ConfigError("backbone expects a 3-channel image");
  if (image.height % 32 != 0 || image.width % 32 != 0 || image.height == 0 || image.width == 0) {
    throw ShapeError("backbone input " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                     " is not a multiple of 32; pad it first");
  }
  Pyramid pyramid;
  FeatureMapf x = relu(conv2d(image, model.stem_conv1, 2, 1));
  x = relu(conv2d(x, model.stem_conv2, 1, 1));
  x = residual_forward(x, model.stage1);
  pyramid.levels[0] = x;

  x = avg_pool(x, 4);
  for (const auto& block : model.stage2) x = residual_forward(x, block);
  pyramid.levels[1] = x;

  x = avg_pool(x, 4);
  for (const auto& block : model.stage3) x = residual_forward(x, block);
  pyramid.levels[2] = std::move(x);
  return pyramid;
}

Pyramid backbone_forward(const FeatureMapf& image, const WeightStore& weights, const ModelConfig& config) {
  return backbone_forward(image, Model::from_store(weights, config));
}

PaddedImage pad_to_multiple(const FeatureMapf& image, int multiple) {
  const auto round_up = [multiple](int v) { return std::max(multiple, (v + multiple - 1) / multiple * multiple); };
  if (image.height < 1 || image.width < 1) throw ShapeError("cannot pad an empty image");
  PaddedImage padded;
  padded.original_height = image.height;
  padded.original_width = image.width;
  const int h = round_up(image.height);
  const int w = round_up(image.width);
  if (h == image.height && w == image.width) {
    padded.image = image;
    return padded;
  }
  padded.image = FeatureMapf(h, w, image.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      padded.image.pixel(y, x) = image.pixel(std::min(y, image.height - 1), std::min(x, image.width - 1));
  return padded;
}

}  // namespace clidd
