#include "clidd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace clidd {

namespace {

constexpr double kInfinityGuard = 1e-12;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

// Similarity transform taking the points to zero mean and mean distance sqrt(2).
Eigen::Matrix3d normalizer(const Points2d& p) {
  const Eigen::RowVector2d mean = p.colwise().mean();
  const double spread = (p.rowwise() - mean).rowwise().norm().mean();
  const double s = spread > 0 ? std::sqrt(2.0) / spread : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mean(0), 0, s, -s * mean(1), 0, 0, 1;
  return t;
}

Points2d apply(const Eigen::Matrix3d& t, const Points2d& p) {
  Points2d out(p.rows(), 2);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const Eigen::Vector3d q = t * Eigen::Vector3d(p(i, 0), p(i, 1), 1.0);
    out.row(i) << q(0) / q(2), q(1) / q(2);
  }
  return out;
}

double triangle_area(const Eigen::RowVector2d& a, const Eigen::RowVector2d& b, const Eigen::RowVector2d& c) {
  return 0.5 * std::abs((b(0) - a(0)) * (c(1) - a(1)) - (b(1) - a(1)) * (c(0) - a(0)));
}

bool minimal_sample_degenerate(const Points2d& p) {
  const double scale = std::max(1.0, (p.rowwise() - p.colwise().mean()).cwiseAbs().maxCoeff());
  const double eps = 1e-6 * scale * scale;
  for (int skip = 0; skip < 4; ++skip) {
    std::array<int, 3> idx{};
    for (int i = 0, k = 0; i < 4; ++i)
      if (i != skip) idx[std::size_t(k++)] = i;
    if (triangle_area(p.row(idx[0]), p.row(idx[1]), p.row(idx[2])) < eps) return true;
  }
  return false;
}

Points2d gather(const Points2d& p, std::span<const int> rows) {
  Points2d out(Eigen::Index(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = p.row(rows[i]);
  return out;
}

std::vector<int> inliers_of(const Homography& h, const Points2d& src, const Points2d& dst, double threshold) {
  std::vector<int> inliers;
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    const Eigen::Vector3d q = h.h * Eigen::Vector3d(src(i, 0), src(i, 1), 1.0);
    if (std::abs(q(2)) < kInfinityGuard) continue;
    const double dx = q(0) / q(2) - dst(i, 0), dy = q(1) / q(2) - dst(i, 1);
    if (dx * dx + dy * dy < threshold * threshold) inliers.push_back(int(i));
  }
  return inliers;
}

std::array<Eigen::Vector2d, 4> image_corners(int width, int height) {
  return {Eigen::Vector2d(0, 0), Eigen::Vector2d(width - 1, 0), Eigen::Vector2d(width - 1, height - 1),
          Eigen::Vector2d(0, height - 1)};
}

}  // namespace

Homography::Homography(const Eigen::Matrix3d& m) : h(m) {
  if (h(2, 2) != 0.0) h /= h(2, 2);
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::inverse() const {
  if (!is_invertible()) throw NumericError("homography is singular");
  return Homography(Eigen::Matrix3d(h.inverse()));
}

Eigen::Vector2d warp_point(const Homography& h, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = h.h * p.homogeneous();
  return q.hnormalized();
}

WarpedPoints warp_points(const Homography& h, const Points2d& points) {
  WarpedPoints out{Points2d(points.rows(), 2), std::vector<std::uint8_t>(std::size_t(points.rows()), 1)};
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::Vector3d q = h.h * Eigen::Vector3d(points(i, 0), points(i, 1), 1.0);
    if (std::abs(q(2)) < kInfinityGuard) {
      out.valid[std::size_t(i)] = 0;
      out.points.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    out.points.row(i) << q(0) / q(2), q(1) / q(2);
  }
  return out;
}

std::vector<std::uint8_t> visibility_mask(const WarpedPoints& warped, int width, int height) {
  std::vector<std::uint8_t> mask(std::size_t(warped.points.rows()), 0);
  for (Eigen::Index i = 0; i < warped.points.rows(); ++i) {
    const double x = warped.points(i, 0), y = warped.points(i, 1);
    mask[std::size_t(i)] = warped.valid[std::size_t(i)] && x >= 0 && x < width && y >= 0 && y < height;
  }
  return mask;
}

Homography dlt_homography(const Points2d& src, const Points2d& dst) {
  if (src.rows() != dst.rows()) throw EstimationError("point sets differ in size");
  if (src.rows() < 4) throw EstimationError("need at least 4 correspondences");
  const Eigen::Matrix3d ts = normalizer(src), td = normalizer(dst);
  const Points2d a = apply(ts, src), b = apply(td, dst);

  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(2 * src.rows(), 9);
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    const double x = a(i, 0), y = a(i, 1), u = b(i, 0), v = b(i, 1);
    system.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    system.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  // A^T A keeps the solve 9x9 regardless of the number of pairs.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(system.transpose() * system, Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericError("DLT: SVD did not converge");
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv(7) <= 1e-12 * std::max(1.0, sv(0))) throw EstimationError("degenerate point configuration");
  const Eigen::VectorXd n = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << n(0), n(1), n(2), n(3), n(4), n(5), n(6), n(7), n(8);
  const Eigen::Matrix3d h = td.inverse() * hn * ts;
  if (std::abs(h.determinant()) < 1e-15 * std::pow(h.norm(), 3)) throw EstimationError("degenerate homography");
  return Homography(h);
}

RansacResult estimate_homography_ransac(const Points2d& src, const Points2d& dst, const RansacOptions& options) {
  if (src.rows() != dst.rows()) throw EstimationError("point sets differ in size");
  const Eigen::Index n = src.rows();
  if (n < 4) throw EstimationError("need at least 4 correspondences, got " + std::to_string(n));

  Homography best_model;
  std::vector<int> best_inliers;
  int usable = 0;
  for (int it = 0; it < options.iterations; ++it) {
    std::mt19937_64 rng(splitmix64(options.seed * 0x100000001B3ull + std::uint64_t(it)));
    std::array<int, 4> pick{};
    for (int k = 0; k < 4; ++k) {
      bool fresh = false;
      while (!fresh) {
        pick[std::size_t(k)] = int(rng() % std::uint64_t(n));
        fresh = std::find(pick.begin(), pick.begin() + k, pick[std::size_t(k)]) == pick.begin() + k;
      }
    }
    const Points2d s = gather(src, pick), d = gather(dst, pick);
    if (minimal_sample_degenerate(s) || minimal_sample_degenerate(d)) continue;
    Homography candidate;
    try {
      candidate = dlt_homography(s, d);
    } catch (const EstimationError&) {
      continue;
    }
    if (!candidate.is_invertible()) continue;
    ++usable;
    auto inliers = inliers_of(candidate, src, dst, options.inlier_threshold);
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      best_model = candidate;
    }
  }
  if (usable == 0 || best_inliers.size() < 4) throw EstimationError("no non-degenerate sample found");

  // Refit on the consensus set until it stops growing.
  for (int round = 0; round < 5; ++round) {
    Homography refit;
    try {
      refit = dlt_homography(gather(src, best_inliers), gather(dst, best_inliers));
    } catch (const EstimationError&) {
      break;
    }
    auto inliers = inliers_of(refit, src, dst, options.inlier_threshold);
    if (inliers.size() < best_inliers.size()) break;
    const bool same = inliers == best_inliers;
    best_model = refit;
    best_inliers = std::move(inliers);
    if (same) break;
  }
  return {best_model, best_inliers};
}

double corner_error(const Homography& estimate, const Homography& truth, int width, int height) {
  double total = 0.0;
  for (const auto& c : image_corners(width, height))
    total += (warp_point(estimate, c) - warp_point(truth, c)).norm();
  return total / 4.0;
}

EvalReport mha_eval(const Homography& estimate, const Homography& truth, int width, int height,
                    const std::array<double, 3>& thresholds) {
  const double error = corner_error(estimate, truth, width, height);
  return aggregate_mha(std::span<const double>(&error, 1), thresholds);
}

EvalReport aggregate_mha(std::span<const double> corner_errors, const std::array<double, 3>& thresholds) {
  EvalReport report;
  report.thresholds = thresholds;
  report.pairs = int(corner_errors.size());
  std::array<int, 3> hits{};
  double sum = 0.0;
  int measured = 0;
  for (double e : corner_errors) {
    if (std::isnan(e)) {
      ++report.failures;
      continue;
    }
    sum += e;
    ++measured;
    for (std::size_t t = 0; t < 3; ++t)
      if (e <= thresholds[t]) ++hits[t];
  }
  for (std::size_t t = 0; t < 3; ++t)
    report.mha[t] = report.pairs > 0 ? 100.0 * hits[t] / report.pairs : 0.0;
  report.mean_corner_error = measured > 0 ? sum / measured : std::numeric_limits<double>::quiet_NaN();
  return report;
}

FeatureMapf warp_image(const FeatureMapf& image, const Homography& h, int out_height, int out_width) {
  const Eigen::Matrix3d inv = h.inverse().h;
  FeatureMapf out(out_height, out_width, image.channels);
  parallel::for_each_index(out_height, [&](std::int64_t y) {
    for (int x = 0; x < out_width; ++x) {
      const Eigen::Vector3d q = inv * Eigen::Vector3d(x, double(y), 1.0);
      if (std::abs(q(2)) < kInfinityGuard) continue;
      const double sx = q(0) / q(2), sy = q(1) / q(2);
      if (sx < -1e-9 || sy < -1e-9 || sx > image.width - 1 + 1e-9 || sy > image.height - 1 + 1e-9) continue;
      bilinear_sample_into(image, float(sx), float(sy), out.pixel(int(y), x).data());
    }
  });
  return out;
}

SynthPair synth_pair(const FeatureMapf& image, std::uint64_t seed, const SynthOptions& options) {
  std::mt19937_64 rng(splitmix64(seed));
  const int w = image.width, h = image.height;
  const auto corners = image_corners(w, h);
  const std::array<Eigen::Vector2d, 4> inward = {Eigen::Vector2d(1, 1), Eigen::Vector2d(-1, 1),
                                                 Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, -1)};
  Points2d src(4, 2), dst(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    const double jx = options.max_jitter * (w - 1) * unit_uniform(rng);
    const double jy = options.max_jitter * (h - 1) * unit_uniform(rng);
    src.row(Eigen::Index(i)) = corners[i].transpose();
    dst.row(Eigen::Index(i)) << corners[i](0) + inward[i](0) * jx, corners[i](1) + inward[i](1) * jy;
  }
  SynthPair pair;
  pair.h_gt = options.max_jitter > 0 ? dlt_homography(src, dst) : Homography::identity();
  pair.warped = warp_image(image, pair.h_gt, h, w);

  const double contrast = 1.0 + options.contrast_jitter * (2.0 * unit_uniform(rng) - 1.0);
  const double brightness = options.brightness_jitter * (2.0 * unit_uniform(rng) - 1.0);
  if (options.photometric) {
    pair.warped.data = ((pair.warped.data.array() - 0.5f) * float(contrast) + 0.5f + float(brightness))
                           .cwiseMax(0.0f)
                           .cwiseMin(1.0f)
                           .matrix();
  }
  return pair;
}

}  // namespace clidd
