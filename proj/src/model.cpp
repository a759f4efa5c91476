#include "clidd/model.hpp"

namespace clidd {

namespace {

Kernel2Df make_kernel(const WeightStore& store, const std::string& prefix) {
  const auto& w = store.at(prefix + ".weight");
  const auto& b = store.at(prefix + ".bias");
  auto k = Kernel2Df::Zero(int(w.shape[0]), int(w.shape[1]), int(w.shape[2]), int(w.shape[3]));
  k.weights = Eigen::Map<const RowMatrixf>(w.data.data(), k.weights.rows(), k.weights.cols());
  k.bias = Eigen::Map<const ColVector<float>>(b.data.data(), k.out_channels);
  return k;
}

AffineMapf make_affine(const WeightStore& store, const std::string& prefix) {
  const auto& w = store.at(prefix + ".weight");
  const auto& b = store.at(prefix + ".bias");
  auto a = AffineMapf::Zero(int(w.shape[0]), int(w.shape[1]));
  a.weights = Eigen::Map<const RowMatrixf>(w.data.data(), a.out_dim, a.in_dim);
  a.bias = Eigen::Map<const ColVector<float>>(b.data.data(), a.out_dim);
  return a;
}

ResidualBlock make_block(const WeightStore& store, const std::string& prefix) {
  ResidualBlock block{make_kernel(store, prefix + ".conv1"), make_kernel(store, prefix + ".conv2"), std::nullopt};
  if (store.find(prefix + ".proj.weight")) block.projection = make_kernel(store, prefix + ".proj");
  return block;
}

}  // namespace

Model Model::from_store(const WeightStore& store, const ModelConfig& config) {
  if (store.config_name != config.name)
    throw ConfigError("weights are for " + store.config_name + ", model config is " + config.name);
  validate_weights(store, config);

  Model model;
  model.config = config;
  model.stem_conv1 = make_kernel(store, "stem.0.conv1");
  model.stem_conv2 = make_kernel(store, "stem.0.conv2");
  model.stage1 = make_block(store, "stage1.0");
  for (int b = 0; b < config.r2; ++b) model.stage2.push_back(make_block(store, "stage2." + std::to_string(b)));
  for (int b = 0; b < config.r3; ++b) model.stage3.push_back(make_block(store, "stage3." + std::to_string(b)));
  for (int l = 0; l < 3; ++l)
    model.detect_compress[std::size_t(l)] = make_kernel(store, "detect.0.compress" + std::to_string(l + 1));
  model.detect_conv1 = make_kernel(store, "detect.0.conv1");
  model.detect_conv2 = make_kernel(store, "detect.0.conv2");
  model.offset_predictor = make_affine(store, "desc.0.offset");
  model.aggregator = make_affine(store, "desc.0.aggregate");
  model.offset_weights_t = model.offset_predictor.weights.transpose();
  model.aggregate_weights_t = model.aggregator.weights.transpose();
  return model;
}

}  // namespace clidd
