// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "tct/errors.hpp"

namespace tct {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense C x H x W feature tensor in channel-major order:
/// data[c * H * W + y * W + x].
template <typename Scalar>
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  Vector<Scalar> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w) {
    if (c <= 0 || h <= 0 || w <= 0)
      throw ParameterError("FeatureMap dimensions must be positive");
    data = Vector<Scalar>::Zero(static_cast<Eigen::Index>(c) * h * w);
  }

  int plane() const { return height * width; }
  Eigen::Index size() const { return data.size(); }

  Scalar& at(int c, int y, int x) {
    return data[static_cast<Eigen::Index>(c) * plane() + y * width + x];
  }
  Scalar at(int c, int y, int x) const {
    return data[static_cast<Eigen::Index>(c) * plane() + y * width + x];
  }

  bool all_finite() const { return data.allFinite(); }
};

template <typename Scalar>
inline void check_same_shape(const FeatureMap<Scalar>& a,
                             const FeatureMap<Scalar>& b) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width)
    throw DimensionError("feature map shapes differ");
}

/// Flattens a C x H x W tensor into an (H*W) x C embedding matrix;
/// row r is spatial index r (row-major over H then W), column c is channel c.
template <typename Scalar>
Matrix<Scalar> reshape_to_embeddings(const FeatureMap<Scalar>& fm) {
  const int n = fm.plane();
  Matrix<Scalar> out(n, fm.channels);
  for (int c = 0; c < fm.channels; ++c)
    out.col(c) = fm.data.segment(static_cast<Eigen::Index>(c) * n, n);
  return out;
}

/// Inverse of reshape_to_embeddings; exact round trip.
template <typename Scalar>
FeatureMap<Scalar> feature_map_from_embeddings(const Matrix<Scalar>& emb,
                                               int height, int width) {
  if (emb.rows() != static_cast<Eigen::Index>(height) * width)
    throw DimensionError("embedding rows do not match H*W");
  FeatureMap<Scalar> fm(static_cast<int>(emb.cols()), height, width);
  const int n = fm.plane();
  for (int c = 0; c < fm.channels; ++c)
    fm.data.segment(static_cast<Eigen::Index>(c) * n, n) = emb.col(c);
  return fm;
}

/// Stacks per-template embedding matrices into one (n*H*W) x C matrix,
/// template by template, oldest first.
template <typename Scalar>
Matrix<Scalar> concat_embeddings(const std::vector<FeatureMap<Scalar>>& fms) {
  if (fms.empty()) throw EmptyEnsembleError("no feature maps to concatenate");
  for (const auto& fm : fms) check_same_shape(fms.front(), fm);
  const int block = fms.front().plane();
  Matrix<Scalar> out(static_cast<Eigen::Index>(block) * fms.size(),
                     fms.front().channels);
  for (std::size_t i = 0; i < fms.size(); ++i)
    out.middleRows(static_cast<Eigen::Index>(i) * block, block) =
        reshape_to_embeddings(fms[i]);
  return out;
}

template <typename Scalar>
Matrix<Scalar> matmul(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul inner dimensions disagree: " +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()));
  return a * b;
}

/// Divides every row by max(||row||_2, eps).
template <typename Scalar>
Matrix<Scalar> l2_normalize_rows(const Matrix<Scalar>& x, Scalar eps) {
  if (!(eps > Scalar(0))) throw ParameterError("eps must be positive");
  Matrix<Scalar> out = x;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Scalar n = out.row(r).norm();
    out.row(r) /= std::max(n, eps);
  }
  return out;
}

/// Joint l2 normalization at the image-patch level: each consecutive block of
/// `block_rows` rows is divided by max(Frobenius norm of the block, eps).
/// block_rows <= 0 treats the whole matrix as a single patch.
template <typename Scalar>
Matrix<Scalar> instance_normalize(const Matrix<Scalar>& x, Scalar eps,
                                  Eigen::Index block_rows = 0) {
  if (!(eps > Scalar(0))) throw ParameterError("eps must be positive");
  if (block_rows <= 0) block_rows = x.rows();
  if (x.rows() % block_rows != 0)
    throw DimensionError("rows not divisible into patch blocks");
  Matrix<Scalar> out = x;
  for (Eigen::Index r = 0; r < out.rows(); r += block_rows) {
    auto block = out.middleRows(r, block_rows);
    block /= std::max(block.norm(), eps);
  }
  return out;
}

}  // namespace tct
