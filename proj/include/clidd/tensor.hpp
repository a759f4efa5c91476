#pragma once

// Dense tensor primitives shared by every network stage. Everything here is header-only and
// templated on the scalar type; the engine itself instantiates float.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "clidd/errors.hpp"
#include "clidd/parallel.hpp"

namespace clidd {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrixf = RowMatrix<float>;
using RowVectorf = RowVector<float>;

/// Dense height x width x channels grid.
///
/// Storage is pixel-major: row `y * width + x` of `data` holds the channel values of cell
/// (y, x). Iteration order is therefore y, then x, then channel.
template <typename Scalar>
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  RowMatrix<Scalar> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c)
      : height(h), width(w), channels(c), data(RowMatrix<Scalar>::Zero(Eigen::Index(h) * w, c)) {}

  static FeatureMap Constant(int h, int w, int c, Scalar value) {
    FeatureMap map(h, w, c);
    map.data.setConstant(value);
    return map;
  }

  Eigen::Index index(int y, int x) const { return Eigen::Index(y) * width + x; }
  Scalar& operator()(int y, int x, int c) { return data(index(y, x), c); }
  Scalar operator()(int y, int x, int c) const { return data(index(y, x), c); }
  auto pixel(int y, int x) { return data.row(index(y, x)); }
  auto pixel(int y, int x) const { return data.row(index(y, x)); }

  bool same_shape(const FeatureMap& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
};

using FeatureMapf = FeatureMap<float>;

/// Convolution parameters. `weights` is out_channels x (in_channels * kh * kw) with the
/// column index `(ci * kh + ky) * kw + kx`, i.e. the usual OIHW flattening.
template <typename Scalar>
struct Kernel2D {
  int out_channels = 0;
  int in_channels = 0;
  int kh = 0;
  int kw = 0;
  RowMatrix<Scalar> weights;
  ColVector<Scalar> bias;

  static Kernel2D Zero(int out_c, int in_c, int kh, int kw) {
    Kernel2D k;
    k.out_channels = out_c;
    k.in_channels = in_c;
    k.kh = kh;
    k.kw = kw;
    k.weights = RowMatrix<Scalar>::Zero(out_c, Eigen::Index(in_c) * kh * kw);
    k.bias = ColVector<Scalar>::Zero(out_c);
    return k;
  }

  Scalar& weight(int o, int i, int y, int x) { return weights(o, (Eigen::Index(i) * kh + y) * kw + x); }
  Scalar weight(int o, int i, int y, int x) const {
    return weights(o, (Eigen::Index(i) * kh + y) * kw + x);
  }
  std::int64_t parameter_count() const { return weights.size() + bias.size(); }
};

using Kernel2Df = Kernel2D<float>;

/// Fully connected map y = W x + b with W stored out_dim x in_dim.
template <typename Scalar>
struct AffineMap {
  int out_dim = 0;
  int in_dim = 0;
  RowMatrix<Scalar> weights;
  ColVector<Scalar> bias;

  static AffineMap Zero(int out_d, int in_d) {
    AffineMap a;
    a.out_dim = out_d;
    a.in_dim = in_d;
    a.weights = RowMatrix<Scalar>::Zero(out_d, in_d);
    a.bias = ColVector<Scalar>::Zero(out_d);
    return a;
  }

  /// Applies the map to every row of `rows` (n x in_dim) and returns n x out_dim.
  template <typename Derived>
  RowMatrix<Scalar> apply(const Eigen::MatrixBase<Derived>& rows) const {
    if (rows.cols() != in_dim) throw ConfigError("affine map input dimension mismatch");
    RowMatrix<Scalar> out = rows * weights.transpose();
    out.rowwise() += bias.transpose();
    return out;
  }

  std::int64_t parameter_count() const { return weights.size() + bias.size(); }
};

using AffineMapf = AffineMap<float>;

inline int conv_output_size(int size, int kernel, int stride, int padding) {
  const int span = size + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

/// Zero-padded cross-correlation plus bias.
///
/// Each output row is an independent im2col block multiplied by the packed kernel, so the
/// value of an output cell does not depend on how rows are distributed across workers.
template <typename Scalar>
FeatureMap<Scalar> conv2d(const FeatureMap<Scalar>& input, const Kernel2D<Scalar>& kernel, int stride,
                          int padding) {
  if (input.channels != kernel.in_channels) {
    throw ConfigError("conv2d: input has " + std::to_string(input.channels) + " channels, kernel expects " +
                      std::to_string(kernel.in_channels));
  }
  if (stride < 1 || padding < 0) throw ConfigError("conv2d: stride must be >= 1 and padding >= 0");
  const int out_h = conv_output_size(input.height, kernel.kh, stride, padding);
  const int out_w = conv_output_size(input.width, kernel.kw, stride, padding);
  if (out_h < 1 || out_w < 1) throw ShapeError("conv2d: output would be empty");

  const int cin = kernel.in_channels;
  const int taps = kernel.kh * kernel.kw;
  const Eigen::Index depth = Eigen::Index(taps) * cin;

  // Packed kernel: row (ky * kw + kx) * cin + ci, one column per output channel.
  RowMatrix<Scalar> packed(depth, kernel.out_channels);
  for (int o = 0; o < kernel.out_channels; ++o)
    for (int ci = 0; ci < cin; ++ci)
      for (int ky = 0; ky < kernel.kh; ++ky)
        for (int kx = 0; kx < kernel.kw; ++kx)
          packed((Eigen::Index(ky) * kernel.kw + kx) * cin + ci, o) = kernel.weight(o, ci, ky, kx);
  const RowVector<Scalar> bias = kernel.bias.transpose();

  FeatureMap<Scalar> output(out_h, out_w, kernel.out_channels);
  parallel::for_each_index(out_h, [&](std::int64_t oy) {
    RowMatrix<Scalar> patches = RowMatrix<Scalar>::Zero(out_w, depth);
    for (int ox = 0; ox < out_w; ++ox) {
      for (int ky = 0; ky < kernel.kh; ++ky) {
        const int iy = int(oy) * stride - padding + ky;
        if (iy < 0 || iy >= input.height) continue;
        for (int kx = 0; kx < kernel.kw; ++kx) {
          const int ix = ox * stride - padding + kx;
          if (ix < 0 || ix >= input.width) continue;
          patches.row(ox).segment((Eigen::Index(ky) * kernel.kw + kx) * cin, cin) = input.pixel(iy, ix);
        }
      }
    }
    auto rows = output.data.middleRows(Eigen::Index(oy) * out_w, out_w);
    rows.noalias() = patches * packed;
    rows.rowwise() += bias;
  });
  return output;
}

/// Mean over non-overlapping factor x factor blocks.
template <typename Scalar>
FeatureMap<Scalar> avg_pool(const FeatureMap<Scalar>& input, int factor) {
  if (factor < 1) throw ShapeError("avg_pool: factor must be >= 1");
  if (input.height % factor != 0 || input.width % factor != 0) {
    throw ShapeError("avg_pool: " + std::to_string(input.height) + "x" + std::to_string(input.width) +
                     " is not divisible by " + std::to_string(factor));
  }
  FeatureMap<Scalar> output(input.height / factor, input.width / factor, input.channels);
  const Scalar scale = Scalar(1) / Scalar(factor * factor);
  for (int y = 0; y < output.height; ++y) {
    for (int x = 0; x < output.width; ++x) {
      auto out = output.pixel(y, x);
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) out += input.pixel(y * factor + dy, x * factor + dx);
      out *= scale;
    }
  }
  return output;
}

/// Sub-pixel rearrangement: channel c * r^2 + dy * r + dx of input cell (y, x) becomes
/// channel c of output cell (r * y + dy, r * x + dx).
template <typename Scalar>
FeatureMap<Scalar> pixel_shuffle(const FeatureMap<Scalar>& input, int r) {
  if (r < 1 || input.channels % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(input.channels) + " channels not divisible by r^2");
  }
  const int out_c = input.channels / (r * r);
  FeatureMap<Scalar> output(input.height * r, input.width * r, out_c);
  for (int y = 0; y < input.height; ++y)
    for (int x = 0; x < input.width; ++x)
      for (int c = 0; c < out_c; ++c)
        for (int dy = 0; dy < r; ++dy)
          for (int dx = 0; dx < r; ++dx)
            output(r * y + dy, r * x + dx, c) = input(y, x, c * r * r + dy * r + dx);
  return output;
}

/// Nearest-neighbour upsampling by an integer factor.
template <typename Scalar>
FeatureMap<Scalar> upsample_nearest(const FeatureMap<Scalar>& input, int factor) {
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  FeatureMap<Scalar> output(input.height * factor, input.width * factor, input.channels);
  for (int y = 0; y < output.height; ++y)
    for (int x = 0; x < output.width; ++x) output.pixel(y, x) = input.pixel(y / factor, x / factor);
  return output;
}

/// Bilinear read at continuous coordinate (x, y) of the map's own grid; cell (i, j) sits at
/// (x = j, y = i). Coordinates are clamped to the grid, which replicates the border.
/// `out` must hold map.channels scalars.
template <typename Scalar>
void bilinear_sample_into(const FeatureMap<Scalar>& map, Scalar x, Scalar y, Scalar* out) {
  const Scalar cx = std::clamp(x, Scalar(0), Scalar(map.width - 1));
  const Scalar cy = std::clamp(y, Scalar(0), Scalar(map.height - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, map.width - 1);
  const int y1 = std::min(y0 + 1, map.height - 1);
  const Scalar fx = cx - Scalar(x0);
  const Scalar fy = cy - Scalar(y0);
  const Scalar w00 = (Scalar(1) - fx) * (Scalar(1) - fy);
  const Scalar w01 = fx * (Scalar(1) - fy);
  const Scalar w10 = (Scalar(1) - fx) * fy;
  const Scalar w11 = fx * fy;
  const Scalar* p00 = map.data.row(map.index(y0, x0)).data();
  const Scalar* p01 = map.data.row(map.index(y0, x1)).data();
  const Scalar* p10 = map.data.row(map.index(y1, x0)).data();
  const Scalar* p11 = map.data.row(map.index(y1, x1)).data();
  for (int c = 0; c < map.channels; ++c) out[c] = w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c];
}

template <typename Scalar>
RowVector<Scalar> bilinear_sample(const FeatureMap<Scalar>& map, Scalar x, Scalar y) {
  RowVector<Scalar> out(map.channels);
  bilinear_sample_into(map, x, y, out.data());
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> relu(FeatureMap<Scalar> map) {
  map.data = map.data.cwiseMax(Scalar(0));
  return map;
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseMax(typename Derived::Scalar(0));
}

/// Scales every row to unit Euclidean norm in place. Rows with zero norm stay zero; their
/// indices are returned.
template <typename Derived>
std::vector<Eigen::Index> l2_normalize_rows(Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  std::vector<Eigen::Index> zero_rows;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Scalar norm = m.row(i).norm();
    if (norm > Scalar(0)) {
      m.row(i) /= norm;
    } else {
      m.row(i).setZero();
      zero_rows.push_back(i);
    }
  }
  return zero_rows;
}

/// Row-wise softmax with max subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> softmax_rows(
    const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Scalar peak = m.row(i).maxCoeff();
    Scalar total = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out(i, j) = std::exp(m(i, j) - peak);
      total += out(i, j);
    }
    out.row(i) /= total;
  }
  return out;
}

/// Column-wise softmax; numerically the same as softmax_rows on the transpose.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> softmax_cols(
    const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out(m.rows(), m.cols());
  std::vector<Scalar> peak(m.cols(), -std::numeric_limits<Scalar>::infinity());
  std::vector<Scalar> total(m.cols(), Scalar(0));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) peak[j] = std::max(peak[j], m(i, j));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out(i, j) = std::exp(m(i, j) - peak[j]);
      total[j] += out(i, j);
    }
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) /= total[j];
  return out;
}

}  // namespace clidd
