#include "clidd/config.hpp"

#include <cmath>
#include <cstdio>

#include "clidd/errors.hpp"

namespace clidd {

namespace {

const std::array<ModelConfig, 9> kPresets = {{
    {"A48", 4, 4, 4, 1, 1, 4, 4, 48},
    {"N64", 8, 8, 8, 1, 1, 8, 8, 64},
    {"T64", 8, 16, 24, 1, 1, 8, 8, 64},
    {"S64", 8, 24, 32, 1, 1, 8, 16, 64},
    {"M64", 16, 32, 48, 1, 1, 8, 16, 64},
    {"L64", 16, 48, 96, 1, 1, 8, 16, 64},
    {"G128", 16, 64, 256, 1, 1, 8, 32, 128},
    {"E128", 16, 64, 256, 2, 2, 8, 32, 128},
    {"U128", 32, 128, 256, 2, 2, 8, 32, 128},
}};

const std::array<PublishedCounts, 9> kPublished = {{
    {"A48", "0.00123", "0.00036", "0.003", "0.004"},
    {"N64", "0.00448", "0.00109", "0.014", "0.019"},
    {"T64", "0.015", "0.00128", "0.027", "0.043"},
    {"S64", "0.026", "0.00141", "0.072", "0.100"},
    {"M64", "0.058", "0.00167", "0.108", "0.168"},
    {"L64", "0.166", "0.00218", "0.179", "0.347"},
    {"G128", "0.809", "0.00359", "1.441", "2.254"},
    {"E128", "2.063", "0.00359", "1.441", "3.508"},
    {"U128", "2.612", "0.00423", "1.784", "4.400"},
}};

void add_conv(std::vector<TensorSpec>& specs, const std::string& prefix, Component component, int out_c,
              int in_c, int k, int stride) {
  const int fan_in = in_c * k * k;
  specs.push_back({prefix + ".weight",
                   {std::uint32_t(out_c), std::uint32_t(in_c), std::uint32_t(k), std::uint32_t(k)},
                   component,
                   fan_in,
                   stride,
                   false});
  specs.push_back({prefix + ".bias", {std::uint32_t(out_c)}, component, fan_in, stride, true});
}

void add_affine(std::vector<TensorSpec>& specs, const std::string& prefix, int out_d, int in_d) {
  specs.push_back(
      {prefix + ".weight", {std::uint32_t(out_d), std::uint32_t(in_d)}, Component::Desc, in_d, 0, false});
  specs.push_back({prefix + ".bias", {std::uint32_t(out_d)}, Component::Desc, in_d, 0, true});
}

void add_residual_block(std::vector<TensorSpec>& specs, const std::string& prefix, int in_c, int out_c,
                        int stride) {
  add_conv(specs, prefix + ".conv1", Component::Backbone, out_c, in_c, 3, stride);
  add_conv(specs, prefix + ".conv2", Component::Backbone, out_c, out_c, 3, stride);
  if (in_c != out_c) add_conv(specs, prefix + ".proj", Component::Backbone, out_c, in_c, 1, stride);
}

}  // namespace

std::span<const ModelConfig> presets() { return kPresets; }

const ModelConfig& preset(std::string_view name) {
  const int id = preset_id(name);
  if (id < 0) throw ConfigError("unknown model config '" + std::string(name) + "'");
  return kPresets[std::size_t(id)];
}

int preset_id(std::string_view name) {
  for (std::size_t i = 0; i < kPresets.size(); ++i)
    if (kPresets[i].name == name) return int(i);
  return -1;
}

std::int64_t TensorSpec::size() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<TensorSpec> architecture(const ModelConfig& config) {
  std::vector<TensorSpec> specs;
  const int c1 = config.c1, c2 = config.c2, c3 = config.c3;

  add_conv(specs, "stem.0.conv1", Component::Backbone, c1, 3, 4, 2);
  add_conv(specs, "stem.0.conv2", Component::Backbone, c1, c1, 3, 2);
  add_residual_block(specs, "stage1.0", c1, c1, 2);
  for (int b = 0; b < config.r2; ++b)
    add_residual_block(specs, "stage2." + std::to_string(b), b == 0 ? c1 : c2, c2, 8);
  for (int b = 0; b < config.r3; ++b)
    add_residual_block(specs, "stage3." + std::to_string(b), b == 0 ? c2 : c3, c3, 32);

  add_conv(specs, "detect.0.compress1", Component::Detect, config.c_det, c1, 1, 2);
  add_conv(specs, "detect.0.compress2", Component::Detect, config.c_det, c2, 1, 8);
  add_conv(specs, "detect.0.compress3", Component::Detect, config.c_det, c3, 1, 32);
  add_conv(specs, "detect.0.conv1", Component::Detect, config.c_det, config.c_det, 3, 2);
  add_conv(specs, "detect.0.conv2", Component::Detect, 4, config.c_det, 3, 2);

  add_affine(specs, "desc.0.offset", 6 * config.m, config.c_sum());
  add_affine(specs, "desc.0.aggregate", config.c_desc, config.m * config.c_sum());
  return specs;
}

ParamCount param_count(const ModelConfig& config) {
  ParamCount count;
  for (const auto& spec : architecture(config)) {
    switch (spec.component) {
      case Component::Backbone: count.backbone += spec.size(); break;
      case Component::Detect: count.detect += spec.size(); break;
      case Component::Desc: count.desc += spec.size(); break;
    }
  }
  count.total = count.backbone + count.detect + count.desc;
  return count;
}

std::int64_t conv_macs(std::int64_t out_h, std::int64_t out_w, std::int64_t in_c, std::int64_t out_c, int kh,
                       int kw) {
  return out_h * out_w * in_c * out_c * kh * kw;
}

std::int64_t flops_estimate(const ModelConfig& config, int height, int width, std::int64_t n_keypoints) {
  if (height <= 0 || width <= 0) return 0;
  std::int64_t macs = 0;
  for (const auto& spec : architecture(config)) {
    if (spec.is_bias) continue;
    if (spec.stride > 0) {
      macs += conv_macs(height / spec.stride, width / spec.stride, spec.shape[1], spec.shape[0],
                        int(spec.shape[2]), int(spec.shape[3]));
    } else {
      macs += n_keypoints * spec.size();
    }
  }
  macs += n_keypoints * (1 + config.m) * config.c_sum() * 4;
  return macs;
}

std::span<const PublishedCounts> published_counts() { return kPublished; }

std::string format_millions(std::int64_t count, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, double(count) / 1e6);
  return buffer;
}

bool round_matches(std::int64_t count, std::string_view displayed) {
  const auto dot = displayed.find('.');
  const int decimals = dot == std::string_view::npos ? 0 : int(displayed.size() - dot - 1);
  return format_millions(count, decimals) == displayed;
}

}  // namespace clidd
