#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "clidd/errors.hpp"
#include "clidd/tensor.hpp"

namespace clidd {

/// Robust estimation could not produce a model (too few or degenerate correspondences).
class EstimationError : public NumericError {
 public:
  using NumericError::NumericError;
};

using Points2d = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// 3x3 projective transform on pixel coordinates (pixel centres at integers), scaled so that
/// h(2, 2) == 1 whenever that entry is non-zero.
struct Homography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();

  Homography() = default;
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);

  Homography inverse() const;
  /// (a * b)(p) == a(b(p))
  Homography operator*(const Homography& other) const { return Homography(h * other.h); }
  bool is_invertible() const { return std::abs(h.determinant()) > 1e-12; }
};

struct WarpedPoints {
  Points2d points;
  std::vector<std::uint8_t> valid;  // 0 where the point maps to infinity
};

WarpedPoints warp_points(const Homography& h, const Points2d& points);
Eigen::Vector2d warp_point(const Homography& h, const Eigen::Vector2d& p);

/// 1 iff the point is valid and 0 <= x < width, 0 <= y < height.
std::vector<std::uint8_t> visibility_mask(const WarpedPoints& warped, int width, int height);

/// Hartley-normalised DLT, least squares over all pairs (n >= 4). Throws EstimationError
/// for degenerate input.
Homography dlt_homography(const Points2d& src, const Points2d& dst);

struct RansacOptions {
  int iterations = 2000;
  double inlier_threshold = 3.0;  // pixels, forward reprojection error
  std::uint64_t seed = 0;
};

struct RansacResult {
  Homography model;
  std::vector<int> inliers;
};

/// 4-point RANSAC followed by a least-squares refit on the consensus set. Every iteration
/// draws from its own seeded stream.
RansacResult estimate_homography_ransac(const Points2d& src, const Points2d& dst, const RansacOptions& options = {});

/// Mean distance between the four image corners mapped by `estimate` and by `truth`.
double corner_error(const Homography& estimate, const Homography& truth, int width, int height);

inline constexpr std::array<double, 3> kMhaThresholds = {1.0, 3.0, 5.0};

struct EvalReport {
  std::array<double, 3> thresholds = kMhaThresholds;
  std::array<double, 3> mha = {0, 0, 0};  // percent of pairs within each threshold
  double mean_corner_error = 0.0;         // over pairs with an estimate
  int pairs = 0;
  int failures = 0;
};

/// Single pair report.
EvalReport mha_eval(const Homography& estimate, const Homography& truth, int width, int height,
                    const std::array<double, 3>& thresholds = kMhaThresholds);

/// Aggregates per-pair corner errors; NaN marks a failed estimate, which counts as a miss at
/// every threshold.
EvalReport aggregate_mha(std::span<const double> corner_errors,
                         const std::array<double, 3>& thresholds = kMhaThresholds);

/// out(p) = bilinear(image, inverse(h) p); cells mapping outside the source are zero.
FeatureMapf warp_image(const FeatureMapf& image, const Homography& h, int out_height, int out_width);

struct SynthOptions {
  /// Each corner moves inward by up to this fraction of the image side.
  double max_jitter = 0.15;
  bool photometric = false;
  double contrast_jitter = 0.1;
  double brightness_jitter = 0.05;
};

struct SynthPair {
  FeatureMapf warped;
  Homography h_gt;  // original pixel -> warped pixel
};

SynthPair synth_pair(const FeatureMapf& image, std::uint64_t seed, const SynthOptions& options = {});

}  // namespace clidd
