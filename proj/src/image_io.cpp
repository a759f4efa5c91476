#include "clidd/image_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace clidd {

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

int parse_positive(const std::string& token, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used == token.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw InputError(path.string() + ": malformed PNM header");
}

}  // namespace

FeatureMapf read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P6" && magic != "P5") throw InputError(path.string() + ": only binary P6/P5 images are supported");
  const int width = parse_positive(next_token(in), path);
  const int height = parse_positive(next_token(in), path);
  const int maxval = parse_positive(next_token(in), path);
  if (maxval != 255) throw InputError(path.string() + ": only 8-bit images are supported");

  const int stored = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> bytes(std::size_t(width) * height * stored);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size())))
    throw InputError(path.string() + ": truncated pixel data");

  FeatureMapf image(height, width, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        image(y, x, c) = float(bytes[(std::size_t(y) * width + x) * stored + (stored == 3 ? c : 0)]) / 255.0f;
  return image;
}

void write_ppm(const FeatureMapf& image, const std::filesystem::path& path) {
  if (image.channels != 3) throw ConfigError("write_ppm expects 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> bytes(std::size_t(image.data.size()));
  for (Eigen::Index i = 0; i < image.data.size(); ++i)
    bytes[std::size_t(i)] = static_cast<unsigned char>(std::lround(std::clamp(image.data(i), 0.0f, 1.0f) * 255.0f));
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

FeatureMapf procedural_image(int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xC11DDull);
  const auto uniform = [&rng] { return float(rng() >> 40) * 0x1.0p-24f; };
  const auto smooth = [](float t) { return t * t * (3.0f - 2.0f * t); };

  FeatureMapf image(height, width, 3);
  const std::array<int, 6> cells = {96, 48, 24, 12, 6, 3};
  const float amplitude = 1.0f;
  float total_amplitude = 0.0f;
  for (int cell : cells) {
    const int gh = height / cell + 2, gw = width / cell + 2;
    std::vector<float> lattice(std::size_t(gh) * gw * 3);
    for (auto& v : lattice) v = uniform();
    for (int y = 0; y < height; ++y) {
      const float fy = float(y) / float(cell);
      const int y0 = int(fy);
      const float ty = smooth(fy - float(y0));
      for (int x = 0; x < width; ++x) {
        const float fx = float(x) / float(cell);
        const int x0 = int(fx);
        const float tx = smooth(fx - float(x0));
        for (int c = 0; c < 3; ++c) {
          const auto at = [&](int yy, int xx) { return lattice[(std::size_t(yy) * gw + xx) * 3 + c]; };
          const float top = at(y0, x0) + (at(y0, x0 + 1) - at(y0, x0)) * tx;
          const float bottom = at(y0 + 1, x0) + (at(y0 + 1, x0 + 1) - at(y0 + 1, x0)) * tx;
          image(y, x, c) += amplitude * (top + (bottom - top) * ty);
        }
      }
    }
    total_amplitude += amplitude;
  }
  image.data /= total_amplitude;

  // Averaging independent octaves squeezes values towards 0.5; stretch to a fixed contrast.
  const float mean = image.data.mean();
  const float sd = std::sqrt((image.data.array() - mean).square().mean());
  const float gain = sd > 0.0f ? 0.25f / sd : 0.0f;
  image.data = ((image.data.array() - mean) * gain + 0.5f).cwiseMax(0.0f).cwiseMin(1.0f).matrix();
  return image;
}

}  // namespace clidd
