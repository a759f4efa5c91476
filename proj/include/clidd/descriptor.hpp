#pragma once

// Cross-layer deformable description head.
//
// For every keypoint one feature vector is read from each pyramid level at the keypoint and
// concatenated (C_sum values). An affine map turns this embedding into 3 x M offsets, one
// set per level in that level's grid units. Each level is then read at its own M offset
// positions, and the M * C_sum samples are aggregated by a second affine map into the
// descriptor, which is L2-normalised.
//
// Aggregation input order is sample-major, level-minor:
//   [s0: L1 | L2 | L3, s1: L1 | L2 | L3, ...]
//
// Two execution paths produce the same numbers. The naive path materialises the full
// N x (M * C_sum) sample matrix before aggregating. The fused path walks keypoints in
// blocks and, for each (sample, level) pair, reads a block x C_level slice and folds it into
// the descriptors through the matching rows of the aggregation matrix, so its scratch space
// does not grow with N.

#include <atomic>
#include <cstdint>

#include "clidd/backbone.hpp"
#include "clidd/detect.hpp"

namespace clidd {

/// Offsets for N keypoints: column (level * M + sample) * 2 holds dx, the next column dy.
struct OffsetSet {
  int samples = 0;
  RowMatrixf values;

  Eigen::Index size() const { return values.rows(); }
  float dx(Eigen::Index i, int level, int sample) const { return values(i, (level * samples + sample) * 2); }
  float dy(Eigen::Index i, int level, int sample) const { return values(i, (level * samples + sample) * 2 + 1); }
};

/// Counts intermediate scalars held by the description paths (current and peak).
class ScratchProbe {
 public:
  void acquire(std::int64_t scalars);
  void release(std::int64_t scalars);
  std::int64_t current() const { return current_.load(); }
  std::int64_t peak() const { return peak_.load(); }
  void reset();

 private:
  std::atomic<std::int64_t> current_{0};
  std::atomic<std::int64_t> peak_{0};
};

/// Row-major float matrix whose size is reported to a ScratchProbe for its lifetime.
class ScratchMatrix {
 public:
  ScratchMatrix(Eigen::Index rows, Eigen::Index cols, ScratchProbe* probe);
  ~ScratchMatrix();
  ScratchMatrix(const ScratchMatrix&) = delete;
  ScratchMatrix& operator=(const ScratchMatrix&) = delete;

  RowMatrixf& matrix() { return matrix_; }
  const RowMatrixf& matrix() const { return matrix_; }

 private:
  RowMatrixf matrix_;
  ScratchProbe* probe_;
};

/// Image pixel coordinate to a level's grid coordinate with cell centres aligned.
inline float level_coordinate(float pixel, int stride) { return (pixel + 0.5f) / float(stride) - 0.5f; }

OffsetSet predict_offsets(const Pyramid& pyramid, const KeypointSet& keypoints, const Model& model,
                          ScratchProbe* probe = nullptr);

/// Reference path; the N x (M * C_sum) sample matrix is materialised.
RowMatrixf describe_naive(const Pyramid& pyramid, const KeypointSet& keypoints, const OffsetSet& offsets,
                          const Model& model, ScratchProbe* probe = nullptr);

inline constexpr int kDefaultBlock = 64;

/// Blocked path: offsets, sampling and aggregation per block of at most `block` keypoints.
RowMatrixf describe_fused(const Pyramid& pyramid, const KeypointSet& keypoints, const Model& model,
                          int block = kDefaultBlock, ScratchProbe* probe = nullptr);

enum class DescribePath { Naive, Fused };

/// predict_offsets + describe_naive, or describe_fused.
RowMatrixf describe(const Pyramid& pyramid, const KeypointSet& keypoints, const Model& model, DescribePath path,
                    int block = kDefaultBlock, ScratchProbe* probe = nullptr);

}  // namespace clidd
