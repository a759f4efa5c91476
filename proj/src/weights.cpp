#include "clidd/weights.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "clidd/binary_io.hpp"

namespace clidd {

namespace {

using Kind = WeightFormatError::Kind;

constexpr char kMagic[4] = {'C', 'L', 'D', 'W'};

// Top 24 bits of the generator mapped onto [0, 1); independent of the standard library's
// distribution implementations.
float unit_uniform(std::mt19937_64& rng) { return float(rng() >> 40) * 0x1.0p-24f; }

std::ptrdiff_t find_index(const WeightStore& store, std::string_view name) {
  for (std::size_t i = 0; i < store.tensors.size(); ++i)
    if (store.tensors[i].name == name) return std::ptrdiff_t(i);
  throw ConfigError("weight store has no tensor '" + std::string(name) + "'");
}

}  // namespace

const NamedTensor* WeightStore::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

NamedTensor* WeightStore::find(std::string_view name) {
  for (auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const NamedTensor& WeightStore::at(std::string_view name) const {
  const auto* t = find(name);
  if (!t) throw ConfigError("weight store has no tensor '" + std::string(name) + "'");
  return *t;
}

std::int64_t WeightStore::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& t : tensors) n += std::int64_t(t.data.size());
  return n;
}

WeightStore init_weights(const ModelConfig& config, std::uint64_t seed, const InitOptions& options) {
  std::mt19937_64 rng(seed);
  WeightStore store;
  store.config_name = config.name;
  for (const auto& spec : architecture(config)) {
    NamedTensor tensor{spec.name, spec.shape, std::vector<float>(std::size_t(spec.size()))};
    const float bound = spec.is_bias ? 1.0f / std::sqrt(float(spec.fan_in)) : std::sqrt(6.0f / float(spec.fan_in));
    for (auto& v : tensor.data) v = bound * (2.0f * unit_uniform(rng) - 1.0f);
    if (spec.name.starts_with("desc.0.offset.") && options.offsets != OffsetInit::Random)
      std::fill(tensor.data.begin(), tensor.data.end(), 0.0f);
    store.tensors.push_back(std::move(tensor));
  }

  if (options.offsets == OffsetInit::Pattern) {
    // Bias layout is (level * M + sample) * 2 + {dx, dy}.
    auto& bias = store.tensors[std::size_t(find_index(store, "desc.0.offset.bias"))].data;
    for (std::size_t i = 0; i < bias.size(); ++i) {
      const int level = int(i / (2 * std::size_t(config.m)));
      const float radius = options.pattern_radius / float(kLevelStrides[std::size_t(level)]);
      bias[i] = radius * (2.0f * unit_uniform(rng) - 1.0f);
    }
  }
  if (options.zero_sum_aggregation) {
    auto& w = store.tensors[std::size_t(find_index(store, "desc.0.aggregate.weight"))].data;
    const std::size_t c_sum = std::size_t(config.c_sum()), m = std::size_t(config.m), k = m * c_sum;
    for (std::size_t o = 0; o < std::size_t(config.c_desc); ++o) {
      for (std::size_t c = 0; c < c_sum; ++c) {
        double mean = 0.0;
        for (std::size_t s = 0; s < m; ++s) mean += w[o * k + s * c_sum + c];
        mean /= double(m);
        for (std::size_t s = 0; s < m; ++s) w[o * k + s * c_sum + c] -= float(mean);
      }
    }
  }
  return store;
}

void validate_weights(const WeightStore& store, const ModelConfig& config) {
  const auto specs = architecture(config);
  if (store.tensors.size() != specs.size()) {
    throw WeightFormatError(Kind::ShapeMismatch, "config " + config.name + " expects " +
                                                     std::to_string(specs.size()) + " tensors, store has " +
                                                     std::to_string(store.tensors.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& t = store.tensors[i];
    if (t.name != specs[i].name) {
      throw WeightFormatError(Kind::ShapeMismatch,
                              "tensor " + std::to_string(i) + " is '" + t.name + "', expected '" + specs[i].name + "'");
    }
    if (t.shape != specs[i].shape || std::int64_t(t.data.size()) != specs[i].size())
      throw WeightFormatError(Kind::ShapeMismatch, "tensor '" + t.name + "' has the wrong shape");
  }
}

void write_weights(std::ostream& out, const WeightStore& store) {
  const int id = preset_id(store.config_name);
  if (id < 0) throw WeightFormatError(Kind::UnknownConfig, "unknown config '" + store.config_name + "'");
  out.write(kMagic, 4);
  binary::write_le(out, kWeightFormatVersion);
  binary::write_le(out, std::uint8_t(id));
  binary::write_le(out, std::uint32_t(store.tensors.size()));
  for (const auto& t : store.tensors) {
    binary::write_le(out, std::uint16_t(t.name.size()));
    out.write(t.name.data(), std::streamsize(t.name.size()));
    binary::write_le(out, std::uint8_t(t.shape.size()));
    for (auto d : t.shape) binary::write_le(out, d);
    binary::write_floats(out, t.data.data(), t.data.size());
  }
  if (!out) throw WeightFormatError(Kind::Io, "failed to write weights");
}

WeightStore read_weights(std::istream& in) {
  auto truncated = [] { return WeightFormatError(Kind::Truncated, "weight file is truncated"); };
  char magic[4];
  if (!in.read(magic, 4)) throw truncated();
  if (!std::equal(magic, magic + 4, kMagic)) throw WeightFormatError(Kind::BadMagic, "not a CLDW weight file");
  std::uint32_t version = 0;
  if (!binary::read_le(in, version)) throw truncated();
  if (version != kWeightFormatVersion) {
    throw WeightFormatError(Kind::VersionMismatch, "weight file version " + std::to_string(version) +
                                                       ", expected " + std::to_string(kWeightFormatVersion));
  }
  std::uint8_t config_id = 0;
  std::uint32_t count = 0;
  if (!binary::read_le(in, config_id) || !binary::read_le(in, count)) throw truncated();
  if (config_id >= presets().size())
    throw WeightFormatError(Kind::UnknownConfig, "unknown config id " + std::to_string(config_id));

  WeightStore store;
  store.config_name = presets()[config_id].name;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    std::uint16_t name_len = 0;
    if (!binary::read_le(in, name_len)) throw truncated();
    t.name.resize(name_len);
    if (!in.read(t.name.data(), name_len)) throw truncated();
    std::uint8_t rank = 0;
    if (!binary::read_le(in, rank)) throw truncated();
    t.shape.resize(rank);
    std::uint64_t n = 1;
    for (auto& d : t.shape) {
      if (!binary::read_le(in, d)) throw truncated();
      n *= d;
    }
    // Guard against absurd sizes from corrupted headers before allocating.
    if (n > (std::uint64_t(1) << 32)) throw WeightFormatError(Kind::ShapeMismatch, "tensor '" + t.name + "' too large");
    t.data.resize(std::size_t(n));
    if (!binary::read_floats(in, t.data.data(), t.data.size())) throw truncated();
    store.tensors.push_back(std::move(t));
  }
  validate_weights(store, presets()[config_id]);
  return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WeightFormatError(Kind::Io, "cannot open " + path.string() + " for writing");
  write_weights(out, store);
}

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFormatError(Kind::Io, "cannot open " + path.string());
  return read_weights(in);
}

}  // namespace clidd
