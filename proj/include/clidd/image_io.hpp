#pragma once

#include <cstdint>
#include <filesystem>

#include "clidd/tensor.hpp"

namespace clidd {

/// Reads an 8-bit binary PPM (P6) or PGM (P5) as H x W x 3 in [0, 1]; grey images are
/// replicated across the three channels. Throws InputError.
FeatureMapf read_pnm(const std::filesystem::path& path);

/// Writes a 3-channel map as P6 (values clamped to [0, 1] and rounded to 8 bits).
void write_ppm(const FeatureMapf& image, const std::filesystem::path& path);

/// Seeded value noise, H x W x 3 in [0, 1]: six equally weighted octaves with lattice cells
/// of 96 down to 3 pixels, stretched to a standard deviation of 0.25 around 0.5 and clipped.
FeatureMapf procedural_image(int height, int width, std::uint64_t seed);

}  // namespace clidd
