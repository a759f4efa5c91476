#include "clidd/detect.hpp"

#include <algorithm>

namespace clidd {

FeatureMapf detect_forward(const Pyramid& pyramid, const Model& model) {
  // A 1x1 convolution commutes with nearest upsampling, so levels are compressed at their
  // native resolution and only the C_det-wide result is upsampled.
  FeatureMapf merged = conv2d(pyramid.level(0), model.detect_compress[0], 1, 0);
  const std::array<int, 2> factors = {kLevelStrides[1] / kLevelStrides[0], kLevelStrides[2] / kLevelStrides[0]};
  for (int l = 1; l < 3; ++l) {
    FeatureMapf compressed = conv2d(pyramid.level(l), model.detect_compress[std::size_t(l)], 1, 0);
    FeatureMapf up = upsample_nearest(compressed, factors[std::size_t(l - 1)]);
    if (!up.same_shape(merged)) throw ShapeError("pyramid levels do not line up");
    merged.data += up.data;
  }
  FeatureMapf x = relu(std::move(merged));
  x = relu(conv2d(x, model.detect_conv1, 1, 1));
  x = conv2d(x, model.detect_conv2, 1, 1);
  return pixel_shuffle(x, 2);
}

FeatureMapf detect_forward(const Pyramid& pyramid, const WeightStore& weights, const ModelConfig& config) {
  return detect_forward(pyramid, Model::from_store(weights, config));
}

KeypointSet nms_topk(const FeatureMapf& heatmap, const NmsOptions& options) {
  if (options.radius < 0) throw ConfigError("nms radius must be >= 0");
  if (options.top_k < 1) throw ConfigError("top_k must be >= 1");
  const int valid_w = options.valid_width < 0 ? heatmap.width : std::min(options.valid_width, heatmap.width);
  const int valid_h = options.valid_height < 0 ? heatmap.height : std::min(options.valid_height, heatmap.height);
  const int r = options.radius;

  // Neighbours in the padded margin still take part in the comparison; only the candidate
  // itself has to lie inside the valid region.
  KeypointSet candidates;
  const auto value = [&](int y, int x) { return heatmap(y, x, 0); };
  for (int y = 0; y < valid_h; ++y) {
    for (int x = 0; x < valid_w; ++x) {
      const float v = value(y, x);
      bool is_max = true;
      const int y0 = std::max(0, y - r), y1 = std::min(heatmap.height - 1, y + r);
      const int x0 = std::max(0, x - r), x1 = std::min(heatmap.width - 1, x + r);
      for (int yy = y0; yy <= y1 && is_max; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) {
          if ((yy != y || xx != x) && value(yy, xx) >= v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back({x, y, v});
    }
  }

  const auto better = [](const Keypoint& a, const Keypoint& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  };
  const std::size_t k = std::min<std::size_t>(std::size_t(options.top_k), candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + std::ptrdiff_t(k), candidates.end(), better);
  candidates.resize(k);
  return candidates;
}

}  // namespace clidd
