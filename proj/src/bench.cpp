#include "clidd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ostream>

#include "clidd/image_io.hpp"
#include "clidd/weights.hpp"

namespace clidd {

const char* path_name(DescribePath path) { return path == DescribePath::Naive ? "naive" : "fused"; }

std::uint64_t descriptor_checksum(const RowMatrixf& descriptors) {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(descriptors.data());
  for (std::size_t i = 0; i < std::size_t(descriptors.size()) * sizeof(float); ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001B3ull;
  }
  return hash;
}

std::vector<BenchRecord> run_bench(const BenchOptions& options) {
  std::vector<BenchRecord> records;
  const FeatureMapf image = procedural_image(options.height, options.width, options.seed);
  const int repeats = std::max(1, options.repeats);
  for (const auto& name : options.configs) {
    const ModelConfig& config = preset(name);
    InitOptions init;
    init.offsets = OffsetInit::Random;
    const Model model = Model::from_store(init_weights(config, options.seed, init), config);
    const Pyramid pyramid = backbone_forward(pad_to_multiple(image).image, model);
    const FeatureMapf heatmap = detect_forward(pyramid, model);
    const int most = *std::max_element(options.keypoints.begin(), options.keypoints.end());
    const KeypointSet all = nms_topk(heatmap, {0, most, options.width, options.height});

    for (int n : options.keypoints) {
      const KeypointSet keypoints(all.begin(), all.begin() + std::min<std::ptrdiff_t>(n, std::ptrdiff_t(all.size())));
      for (DescribePath path : options.paths) {
        const std::vector<int> blocks = path == DescribePath::Naive ? std::vector<int>{0} : options.blocks;
        for (int block : blocks) {
          BenchRecord rec{config.name, path, int(keypoints.size()), block, repeats};
          {
            // Scratch is reported for a single worker; fused blocks in flight scale it by the
            // worker count.
            parallel::ScopedWorkers single(1);
            ScratchProbe probe;
            const RowMatrixf d = describe(pyramid, keypoints, model, path, std::max(block, 1), &probe);
            rec.peak_scratch = probe.peak();
            rec.checksum = descriptor_checksum(d);
          }
          std::vector<double> times;
          for (int r = 0; r < repeats; ++r) {
            const auto start = std::chrono::steady_clock::now();
            const RowMatrixf d = describe(pyramid, keypoints, model, path, std::max(block, 1));
            const auto stop = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
            if (descriptor_checksum(d) != rec.checksum) throw NumericError("bench: descriptors changed between runs");
          }
          std::sort(times.begin(), times.end());
          rec.wall_ms = times[times.size() / 2];
          rec.throughput = rec.wall_ms > 0 ? 1000.0 / rec.wall_ms : 0.0;
          records.push_back(rec);
        }
      }
    }
  }
  return records;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records, bool timing) {
  out << "# clidd-bench v1\n";
  out << "config,path,n_keypoints,block,repeats,wall_ms,throughput_ips,peak_scratch_scalars,checksum\n";
  char buffer[64];
  for (const auto& r : records) {
    out << r.config << "," << path_name(r.path) << "," << r.n_keypoints << "," << r.block << "," << r.repeats << ",";
    if (timing) {
      std::snprintf(buffer, sizeof(buffer), "%.4f,%.3f", r.wall_ms, r.throughput);
      out << buffer;
    } else {
      out << "na,na";
    }
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(r.checksum));
    out << "," << r.peak_scratch << "," << buffer << "\n";
  }
}

}  // namespace clidd
