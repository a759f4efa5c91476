#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "clidd/descriptor.hpp"

namespace clidd {

struct BenchOptions {
  std::vector<std::string> configs = {"A48"};
  std::vector<int> keypoints = {1024, 2048, 4096, 8192, 16384};
  std::vector<DescribePath> paths = {DescribePath::Naive, DescribePath::Fused};
  std::vector<int> blocks = {kDefaultBlock};
  int repeats = 3;
  int height = 480;
  int width = 640;
  std::uint64_t seed = 0;
};

/// One (config, path, N, block) cell; the naive path reports block 0.
struct BenchRecord {
  std::string config;
  DescribePath path = DescribePath::Fused;
  int n_keypoints = 0;
  int block = 0;
  int repeats = 0;
  double wall_ms = 0.0;  // median over repeats, description stage only
  double throughput = 0.0;  // images per second for the description stage
  std::int64_t peak_scratch = 0;  // intermediate scalars
  std::uint64_t checksum = 0;  // FNV-1a over the descriptor bytes
};

/// Times the description stage on a fixed procedural image. Keypoints are the N strongest
/// heatmap cells without suppression, so detection is identical for both paths.
std::vector<BenchRecord> run_bench(const BenchOptions& options);

/// With `timing` false the wall-time and throughput columns hold "na", which makes the
/// output reproducible byte for byte.
void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records, bool timing = true);

std::uint64_t descriptor_checksum(const RowMatrixf& descriptors);

const char* path_name(DescribePath path);

}  // namespace clidd
