#include "clidd/descriptor.hpp"

#include <algorithm>

namespace clidd {

void ScratchProbe::acquire(std::int64_t scalars) {
  const std::int64_t now = current_.fetch_add(scalars) + scalars;
  std::int64_t seen = peak_.load();
  while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
  }
}

void ScratchProbe::release(std::int64_t scalars) { current_.fetch_sub(scalars); }

void ScratchProbe::reset() {
  current_.store(0);
  peak_.store(0);
}

ScratchMatrix::ScratchMatrix(Eigen::Index rows, Eigen::Index cols, ScratchProbe* probe)
    : matrix_(RowMatrixf::Zero(rows, cols)), probe_(probe) {
  if (probe_) probe_->acquire(matrix_.size());
}

ScratchMatrix::~ScratchMatrix() {
  if (probe_) probe_->release(matrix_.size());
}

namespace {

// y += a * x. Both paths use this exact loop so per-element accumulation order matches.
inline void axpy(float a, const float* x, float* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

void embed_keypoint(const Pyramid& pyramid, const Model& model, const Keypoint& kp, float* out) {
  const auto offsets = model.config.level_offsets();
  for (int l = 0; l < 3; ++l) {
    const int stride = kLevelStrides[std::size_t(l)];
    bilinear_sample_into(pyramid.level(l), level_coordinate(float(kp.x), stride),
                         level_coordinate(float(kp.y), stride), out + offsets[std::size_t(l)]);
  }
}

// out (6M) = bias + sum_k embedding[k] * Wt.row(k)
void offsets_from_embedding(const Model& model, const float* embedding, float* out) {
  const int width = 6 * model.config.m;
  std::copy_n(model.offset_predictor.bias.data(), width, out);
  const int c_sum = model.config.c_sum();
  for (int k = 0; k < c_sum; ++k) axpy(embedding[k], model.offset_weights_t.row(k).data(), out, width);
}

void check_pyramid(const Pyramid& pyramid, const Model& model) {
  const auto channels = model.config.level_channels();
  for (int l = 0; l < 3; ++l) {
    if (pyramid.level(l).channels != channels[std::size_t(l)])
      throw ConfigError("pyramid level " + std::to_string(l + 1) + " does not match config " + model.config.name);
  }
}

void init_descriptor_rows(RowMatrixf& descriptors, Eigen::Index begin, Eigen::Index end, const Model& model) {
  for (Eigen::Index i = begin; i < end; ++i) descriptors.row(i) = model.aggregator.bias.transpose();
}

}  // namespace

OffsetSet predict_offsets(const Pyramid& pyramid, const KeypointSet& keypoints, const Model& model,
                          ScratchProbe* probe) {
  check_pyramid(pyramid, model);
  const auto n = Eigen::Index(keypoints.size());
  ScratchMatrix embedding(n, model.config.c_sum(), probe);
  OffsetSet offsets{model.config.m, RowMatrixf::Zero(n, 6 * model.config.m)};
  parallel::for_each_index(n, [&](std::int64_t i) {
    float* e = embedding.matrix().row(i).data();
    embed_keypoint(pyramid, model, keypoints[std::size_t(i)], e);
    offsets_from_embedding(model, e, offsets.values.row(i).data());
  });
  return offsets;
}

RowMatrixf describe_naive(const Pyramid& pyramid, const KeypointSet& keypoints, const OffsetSet& offsets,
                          const Model& model, ScratchProbe* probe) {
  check_pyramid(pyramid, model);
  const auto& cfg = model.config;
  const auto n = Eigen::Index(keypoints.size());
  if (offsets.size() != n || offsets.samples != cfg.m) throw ConfigError("offsets do not match keypoints");
  const int c_sum = cfg.c_sum();
  const auto level_offsets = cfg.level_offsets();

  ScratchMatrix samples(n, Eigen::Index(cfg.m) * c_sum, probe);
  parallel::for_each_index(n, [&](std::int64_t i) {
    const auto& kp = keypoints[std::size_t(i)];
    float* row = samples.matrix().row(i).data();
    for (int s = 0; s < cfg.m; ++s) {
      for (int l = 0; l < 3; ++l) {
        const int stride = kLevelStrides[std::size_t(l)];
        const float x = level_coordinate(float(kp.x), stride) + offsets.dx(i, l, s);
        const float y = level_coordinate(float(kp.y), stride) + offsets.dy(i, l, s);
        bilinear_sample_into(pyramid.level(l), x, y, row + s * c_sum + level_offsets[std::size_t(l)]);
      }
    }
  });

  RowMatrixf descriptors(n, cfg.c_desc);
  const auto depth = samples.matrix().cols();
  parallel::for_each_index(n, [&](std::int64_t i) {
    init_descriptor_rows(descriptors, i, i + 1, model);
    float* out = descriptors.row(i).data();
    const float* in = samples.matrix().row(i).data();
    for (Eigen::Index k = 0; k < depth; ++k) axpy(in[k], model.aggregate_weights_t.row(k).data(), out, cfg.c_desc);
    auto row = descriptors.row(i);
    const float norm = row.norm();
    if (norm > 0.0f) row /= norm;
  });
  return descriptors;
}

RowMatrixf describe_fused(const Pyramid& pyramid, const KeypointSet& keypoints, const Model& model, int block,
                          ScratchProbe* probe) {
  if (block < 1) throw ConfigError("block must be >= 1");
  check_pyramid(pyramid, model);
  const auto& cfg = model.config;
  const auto n = Eigen::Index(keypoints.size());
  const int c_sum = cfg.c_sum();
  const auto channels = cfg.level_channels();
  const auto level_offsets = cfg.level_offsets();
  const int widest = *std::max_element(channels.begin(), channels.end());

  RowMatrixf descriptors(n, cfg.c_desc);
  const std::int64_t blocks = (n + block - 1) / block;
  parallel::for_each_index(blocks, [&](std::int64_t b) {
    const Eigen::Index begin = b * block;
    const Eigen::Index end = std::min<Eigen::Index>(n, begin + block);
    const Eigen::Index rows = end - begin;

    ScratchMatrix embedding(rows, c_sum, probe);
    ScratchMatrix offsets(rows, 6 * cfg.m, probe);
    ScratchMatrix slice(rows, widest, probe);
    for (Eigen::Index r = 0; r < rows; ++r) {
      float* e = embedding.matrix().row(r).data();
      embed_keypoint(pyramid, model, keypoints[std::size_t(begin + r)], e);
      offsets_from_embedding(model, e, offsets.matrix().row(r).data());
    }
    init_descriptor_rows(descriptors, begin, end, model);

    for (int s = 0; s < cfg.m; ++s) {
      for (int l = 0; l < 3; ++l) {
        const int stride = kLevelStrides[std::size_t(l)];
        const int c_level = channels[std::size_t(l)];
        for (Eigen::Index r = 0; r < rows; ++r) {
          const auto& kp = keypoints[std::size_t(begin + r)];
          const float x = level_coordinate(float(kp.x), stride) + offsets.matrix()(r, (l * cfg.m + s) * 2);
          const float y = level_coordinate(float(kp.y), stride) + offsets.matrix()(r, (l * cfg.m + s) * 2 + 1);
          bilinear_sample_into(pyramid.level(l), x, y, slice.matrix().row(r).data());
        }
        // Layer-wise slice of the aggregation matrix: rows s * C_sum + offset_l + c.
        const Eigen::Index first_row = Eigen::Index(s) * c_sum + level_offsets[std::size_t(l)];
        for (int c = 0; c < c_level; ++c) {
          const float* w = model.aggregate_weights_t.row(first_row + c).data();
          for (Eigen::Index r = 0; r < rows; ++r)
            axpy(slice.matrix()(r, c), w, descriptors.row(begin + r).data(), cfg.c_desc);
        }
      }
    }
    for (Eigen::Index i = begin; i < end; ++i) {
      auto row = descriptors.row(i);
      const float norm = row.norm();
      if (norm > 0.0f) row /= norm;
    }
  });
  return descriptors;
}

RowMatrixf describe(const Pyramid& pyramid, const KeypointSet& keypoints, const Model& model, DescribePath path,
                    int block, ScratchProbe* probe) {
  if (path == DescribePath::Fused) return describe_fused(pyramid, keypoints, model, block, probe);
  OffsetSet offsets = predict_offsets(pyramid, keypoints, model, probe);
  if (probe) probe->acquire(offsets.values.size());
  RowMatrixf descriptors = describe_naive(pyramid, keypoints, offsets, model, probe);
  if (probe) probe->release(offsets.values.size());
  return descriptors;
}

}  // namespace clidd
