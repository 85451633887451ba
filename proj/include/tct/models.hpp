// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "tct/tensor.hpp"
#include "tct/transformer.hpp"

namespace tct {

/// C x k_h x k_w correlation kernel plus a scalar bias, channel-major data.
template <typename Scalar>
struct CorrelationKernel {
  int channels = 0;
  int k_h = 0;
  int k_w = 0;
  Vector<Scalar> data;
  Scalar bias = Scalar(0);

  Scalar at(int c, int y, int x) const {
    return data[(static_cast<Eigen::Index>(c) * k_h + y) * k_w + x];
  }
  Scalar& at(int c, int y, int x) {
    return data[(static_cast<Eigen::Index>(c) * k_h + y) * k_w + x];
  }
};

/// Integer cell box: top-left (row, col) plus extents, in grid cells.
struct CellBox {
  int top = 0;
  int left = 0;
  int h = 0;
  int w = 0;
};

/// Gaussian map over an H x W grid in normalized [0,1]^2 coordinates; cell
/// (i, j) sits at ((i+0.5)/H, (j+0.5)/W) and carries
/// exp(-||y - c||^2 / (2 sigma^2)). Serves both as regression label and as
/// spatial target mask.
template <typename Scalar>
struct GaussianLabel {
  int height = 0;
  int width = 0;
  Scalar center_row = 0;  // normalized [0,1]
  Scalar center_col = 0;
  Scalar sigma = 0;
  Vector<Scalar> data;  // H*W, row-major
};

template <typename Scalar>
GaussianLabel<Scalar> gaussian_label(int height, int width,
                                     std::pair<Scalar, Scalar> center,
                                     Scalar sigma) {
  if (!(sigma > Scalar(0))) throw ParameterError("sigma must be positive");
  if (height <= 0 || width <= 0)
    throw ParameterError("label grid must be positive");
  if (center.first < Scalar(0) || center.first > Scalar(1) ||
      center.second < Scalar(0) || center.second > Scalar(1))
    throw ParameterError("center must lie in [0,1]^2");
  GaussianLabel<Scalar> g;
  g.height = height;
  g.width = width;
  g.center_row = center.first;
  g.center_col = center.second;
  g.sigma = sigma;
  g.data.resize(static_cast<Eigen::Index>(height) * width);
  const Scalar denom = Scalar(2) * sigma * sigma;
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const Scalar dy = (Scalar(i) + Scalar(0.5)) / height - center.first;
      const Scalar dx = (Scalar(j) + Scalar(0.5)) / width - center.second;
      g.data[static_cast<Eigen::Index>(i) * width + j] =
          std::exp(-(dy * dy + dx * dx) / denom);
    }
  return g;
}

/// Gaussian mask peaked exactly (value 1) at grid cell (row, col).
template <typename Scalar>
Vector<Scalar> gaussian_mask_at_cell(int height, int width, int row, int col,
                                     Scalar sigma) {
  if (row < 0 || row >= height || col < 0 || col >= width)
    throw OutOfBoundsError("mask center outside grid");
  auto g = gaussian_label<Scalar>(
      height, width,
      {(Scalar(row) + Scalar(0.5)) / height, (Scalar(col) + Scalar(0.5)) / width},
      sigma);
  return g.data;
}

/// Valid-mode multi-channel cross-correlation summed over channels plus bias,
/// zero-padded back to H x W so that index (i + (k_h-1)/2, j + (k_w-1)/2)
/// holds the score of the kernel centered there; response coordinates align
/// with the search grid.
template <typename Scalar>
Matrix<Scalar> cross_correlate(const CorrelationKernel<Scalar>& kernel,
                               const FeatureMap<Scalar>& search) {
  if (kernel.channels != search.channels)
    throw DimensionError("kernel/search channel mismatch");
  if (kernel.k_h > search.height || kernel.k_w > search.width)
    throw DimensionError("kernel larger than search map");
  const int oh = search.height - kernel.k_h + 1;
  const int ow = search.width - kernel.k_w + 1;
  const int r0 = (kernel.k_h - 1) / 2;
  const int c0 = (kernel.k_w - 1) / 2;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(search.height, search.width);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      Scalar acc = 0;
      for (int c = 0; c < kernel.channels; ++c)
        for (int y = 0; y < kernel.k_h; ++y)
          for (int x = 0; x < kernel.k_w; ++x)
            acc += kernel.at(c, y, x) * search.at(c, i + y, j + x);
      out(i + r0, j + c0) = acc + kernel.bias;
    }
  return out;
}

/// Deterministic argmax: ties broken by the smallest row-major index.
template <typename Scalar>
std::pair<int, int> response_argmax(const Matrix<Scalar>& response) {
  int best_r = 0, best_c = 0;
  Scalar best = response(0, 0);
  for (int i = 0; i < response.rows(); ++i)
    for (int j = 0; j < response.cols(); ++j)
      if (response(i, j) > best) {
        best = response(i, j);
        best_r = i;
        best_c = j;
      }
  return {best_r, best_c};
}

/// Crops the C x h x w sub-tensor under `box` from the most recent template
/// in the encoded ensemble; bias starts at 0.
template <typename Scalar>
CorrelationKernel<Scalar> crop_target_kernel(
    const EncodedTemplates<Scalar>& encoded, const CellBox& box) {
  if (box.h <= 0 || box.w <= 0) throw ParameterError("box extents must be > 0");
  if (box.top < 0 || box.left < 0 || box.top + box.h > encoded.height ||
      box.left + box.w > encoded.width)
    throw OutOfBoundsError("crop box outside template extent");
  const FeatureMap<Scalar> t = encoded.block(encoded.count - 1);
  CorrelationKernel<Scalar> k;
  k.channels = t.channels;
  k.k_h = box.h;
  k.k_w = box.w;
  k.data.resize(static_cast<Eigen::Index>(k.channels) * box.h * box.w);
  for (int c = 0; c < k.channels; ++c)
    for (int y = 0; y < box.h; ++y)
      for (int x = 0; x < box.w; ++x)
        k.at(c, y, x) = t.at(c, box.top + y, box.left + x);
  return k;
}

namespace detail {

/// Design matrix of the valid-mode correlation operator for one template:
/// one row per output position, one column per kernel coefficient.
template <typename Scalar>
Matrix<Scalar> correlation_design(const FeatureMap<Scalar>& t, int k_h,
                                  int k_w) {
  const int oh = t.height - k_h + 1;
  const int ow = t.width - k_w + 1;
  Matrix<Scalar> x(static_cast<Eigen::Index>(oh) * ow,
                   static_cast<Eigen::Index>(t.channels) * k_h * k_w);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * ow + j;
      Eigen::Index col = 0;
      for (int c = 0; c < t.channels; ++c)
        for (int y = 0; y < k_h; ++y)
          for (int xx = 0; xx < k_w; ++xx)
            x(row, col++) = t.at(c, i + y, j + xx);
    }
  return x;
}

}  // namespace detail

/// Exact minimizer of the multi-template ridge objective
///   sum_i ||f * T_i - y_i||^2 + lambda ||f||^2
/// assembled as explicit normal equations and solved by a dense SPD
/// factorization. Labels are read at the centered output positions so the
/// learned kernel peaks where the label does.
template <typename Scalar>
CorrelationKernel<Scalar> solve_dcf(const EncodedTemplates<Scalar>& encoded,
                                    const std::vector<GaussianLabel<Scalar>>& labels,
                                    Scalar lambda, int k_h, int k_w) {
  if (lambda < Scalar(0)) throw ParameterError("lambda must be >= 0");
  if (static_cast<int>(labels.size()) != encoded.count)
    throw DimensionError("need exactly one label per template");
  if (k_h <= 0 || k_w <= 0 || k_h > encoded.height || k_w > encoded.width)
    throw ParameterError("kernel does not fit the template grid");
  const int oh = encoded.height - k_h + 1;
  const int ow = encoded.width - k_w + 1;
  const int r0 = (k_h - 1) / 2;
  const int c0 = (k_w - 1) / 2;
  const Eigen::Index dim =
      static_cast<Eigen::Index>(encoded.channels) * k_h * k_w;

  Matrix<Scalar> gram = Matrix<Scalar>::Zero(dim, dim);
  Vector<Scalar> rhs = Vector<Scalar>::Zero(dim);
  for (int i = 0; i < encoded.count; ++i) {
    const auto& label = labels[i];
    if (label.height != encoded.height || label.width != encoded.width)
      throw DimensionError("label grid does not match template grid");
    const FeatureMap<Scalar> t = encoded.block(i);
    const Matrix<Scalar> x = detail::correlation_design(t, k_h, k_w);
    Vector<Scalar> y(static_cast<Eigen::Index>(oh) * ow);
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c)
        y[static_cast<Eigen::Index>(r) * ow + c] =
            label.data[static_cast<Eigen::Index>(r + r0) * label.width + c + c0];
    gram.noalias() += x.transpose() * x;
    rhs.noalias() += x.transpose() * y;
  }
  gram.diagonal().array() += lambda;

  Vector<Scalar> f;
  if (lambda == Scalar(0)) {
    Eigen::FullPivLU<Matrix<Scalar>> lu(gram);
    if (!lu.isInvertible())
      throw ParameterError(
          "design matrix is rank-deficient; use lambda > 0 to regularize");
    f = lu.solve(rhs);
  } else {
    f = Eigen::LLT<Matrix<Scalar>>(gram).solve(rhs);
  }

  CorrelationKernel<Scalar> k;
  k.channels = encoded.channels;
  k.k_h = k_h;
  k.k_w = k_w;
  k.data = std::move(f);
  k.bias = Scalar(0);
  return k;
}

}  // namespace tct
