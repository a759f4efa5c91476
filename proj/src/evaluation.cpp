#include "clidd/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "clidd/image_io.hpp"

namespace clidd {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t x = seed * 0x9E3779B97F4A7C15ull + index + 1;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::string fixed(double v, int decimals = 6) {
  if (std::isnan(v)) return "nan";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, v);
  return buffer;
}

}  // namespace

std::vector<NamedImage> procedural_images(int count, std::uint64_t seed) {
  std::vector<NamedImage> images;
  for (int i = 0; i < count; ++i)
    images.push_back({"procedural-" + std::to_string(i), procedural_image(480, 640, mix_seed(seed, std::uint64_t(i)))});
  return images;
}

SyntheticEvalResult run_synthetic_eval(const std::vector<NamedImage>& images, const Model& model,
                                       const SyntheticEvalOptions& options) {
  SyntheticEvalResult result;
  std::vector<double> errors;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& source = images[i];
    PairResult pr;
    pr.image = source.name;
    pr.seed = mix_seed(options.seed ^ 0xE7A1ull, i);
    pr.corner_error = std::numeric_limits<double>::quiet_NaN();
    try {
      const SynthPair pair = synth_pair(source.image, pr.seed, options.synth);
      const Features a = extract_features(source.image, model, options.extract);
      const Features b = extract_features(pair.warped, model, options.extract);
      pr.keypoints_a = int(a.keypoints.size());
      pr.keypoints_b = int(b.keypoints.size());
      const MatchSet matches = dual_softmax_match(a.descriptors, b.descriptors, options.match);
      pr.matches = int(matches.pairs.size());

      Points2d src(pr.matches, 2), dst(pr.matches, 2);
      for (int m = 0; m < pr.matches; ++m) {
        const auto& kp_a = a.keypoints[std::size_t(matches.pairs[std::size_t(m)].index_a)];
        const auto& kp_b = b.keypoints[std::size_t(matches.pairs[std::size_t(m)].index_b)];
        src.row(m) << kp_a.x, kp_a.y;
        dst.row(m) << kp_b.x, kp_b.y;
      }
      RansacOptions ransac = options.ransac;
      ransac.seed = pr.seed;
      const RansacResult fit = estimate_homography_ransac(src, dst, ransac);
      pr.inliers = int(fit.inliers.size());
      pr.corner_error = corner_error(fit.model, pair.h_gt, source.image.width, source.image.height);
      pr.ok = true;
    } catch (const Error& e) {
      pr.ok = false;
      pr.error = e.what();
    }
    errors.push_back(pr.corner_error);
    result.pairs.push_back(std::move(pr));
  }
  result.report = aggregate_mha(errors);
  return result;
}

void write_eval_csv(std::ostream& out, const SyntheticEvalResult& result) {
  const auto& th = result.report.thresholds;
  out << "# clidd-eval v1\n";
  out << "pair,image,seed,status,keypoints_a,keypoints_b,matches,inliers,corner_error";
  for (double t : th) out << ",pass_" << fixed(t, 0);
  out << "\n";
  for (std::size_t i = 0; i < result.pairs.size(); ++i) {
    const auto& p = result.pairs[i];
    out << i << "," << p.image << "," << p.seed << "," << (p.ok ? "ok" : "failed") << "," << p.keypoints_a << ","
        << p.keypoints_b << "," << p.matches << "," << p.inliers << "," << fixed(p.corner_error);
    for (double t : th) out << "," << (p.ok && p.corner_error <= t ? 1 : 0);
    out << "\n";
  }
  // Aggregate row: pair count, failures, mean corner error, then MHA percentages.
  const auto& r = result.report;
  out << "aggregate," << r.pairs << ",,failures=" << r.failures << ",,,,," << fixed(r.mean_corner_error);
  for (double v : r.mha) out << "," << fixed(v, 2);
  out << "\n";
}

}  // namespace clidd
