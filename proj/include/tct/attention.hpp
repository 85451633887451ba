// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include "tct/rng.hpp"
#include "tct/tensor.hpp"

namespace tct {

inline int reduced_channels(int c) { return (c + 3) / 4; }

/// Bias-free 1x1 linear map from C channels down to ceil(C/4).
/// Weights are (C/4) x C; applying to an N x C matrix yields N x (C/4).
template <typename Scalar>
struct LinearProjection {
  Matrix<Scalar> weights;

  int in_channels() const { return static_cast<int>(weights.cols()); }
  int out_channels() const { return static_cast<int>(weights.rows()); }

  /// Seeded uniform init on [-1/sqrt(C), 1/sqrt(C)].
  static LinearProjection seeded_uniform(int in, std::uint64_t seed,
                                         int out = 0) {
    if (out <= 0) out = reduced_channels(in);
    CounterRng rng(seed, /*stream=*/0x70726f6aULL);
    const Scalar bound = Scalar(1) / std::sqrt(Scalar(in));
    LinearProjection p;
    p.weights.resize(out, in);
    std::uint64_t ctr = 0;
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c)
        p.weights(r, c) = static_cast<Scalar>(rng.uniform(ctr++, -bound, bound));
    return p;
  }

  /// Random projection with orthonormal rows (Gram-Schmidt over seeded
  /// Gaussian rows), so inner products between embeddings are approximately
  /// preserved after the channel reduction.
  static LinearProjection orthonormal(int in, std::uint64_t seed, int out = 0) {
    if (out <= 0) out = reduced_channels(in);
    if (out > in) throw ParameterError("orthonormal projection needs out <= in");
    CounterRng rng(seed, /*stream=*/0x6f72746fULL);
    Matrix<Scalar> w(out, in);
    std::uint64_t ctr = 0;
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c)
        w(r, c) = static_cast<Scalar>(rng.normal(ctr++));
    for (int r = 0; r < out; ++r) {
      for (int p = 0; p < r; ++p) w.row(r) -= w.row(r).dot(w.row(p)) * w.row(p);
      const Scalar n = w.row(r).norm();
      if (n < Scalar(1e-8))
        throw ParameterError("degenerate rows in orthonormal init");
      w.row(r) /= n;
    }
    LinearProjection p;
    p.weights = std::move(w);
    return p;
  }
};

template <typename Scalar>
Matrix<Scalar> project(const LinearProjection<Scalar>& p,
                       const Matrix<Scalar>& x) {
  if (x.cols() != p.weights.cols())
    throw DimensionError("projection channel mismatch");
  return x * p.weights.transpose();
}

/// Normalized dot-product attention with temperature: rows of Q and K are
/// l2-normalized, logits are QK^T / tau, and a stabilized softmax makes each
/// query row a distribution over the keys.
template <typename Scalar>
Matrix<Scalar> attention(const Matrix<Scalar>& q, const Matrix<Scalar>& k,
                         Scalar tau, Scalar eps = Scalar(1e-12)) {
  if (!(tau > Scalar(0))) throw ParameterError("temperature must be positive");
  if (q.cols() != k.cols()) throw DimensionError("Q/K channel mismatch");
  const Matrix<Scalar> qn = l2_normalize_rows(q, eps);
  const Matrix<Scalar> kn = l2_normalize_rows(k, eps);
  Matrix<Scalar> logits = (qn * kn.transpose()) / tau;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return logits;
}

/// A * V: convex combination of value rows per query row.
template <typename Scalar>
Matrix<Scalar> transform_values(const Matrix<Scalar>& a,
                                const Matrix<Scalar>& v) {
  if (a.cols() != v.rows())
    throw DimensionError("attention keys do not match value rows");
  return a * v;
}

// Binary weight file: 8-byte header (magic "TCTW", uint16 LE in-channels,
// uint16 LE out-channels) followed by out*in little-endian float64 values,
// row-major.
template <typename Scalar>
void save_projection(const LinearProjection<Scalar>& p,
                     const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open for write: " + path);
  const unsigned char magic[4] = {'T', 'C', 'T', 'W'};
  std::uint16_t in = static_cast<std::uint16_t>(p.in_channels());
  std::uint16_t out = static_cast<std::uint16_t>(p.out_channels());
  unsigned char hdr[8] = {magic[0],
                          magic[1],
                          magic[2],
                          magic[3],
                          static_cast<unsigned char>(in & 0xff),
                          static_cast<unsigned char>(in >> 8),
                          static_cast<unsigned char>(out & 0xff),
                          static_cast<unsigned char>(out >> 8)};
  std::fwrite(hdr, 1, 8, f);
  for (int r = 0; r < p.out_channels(); ++r)
    for (int c = 0; c < p.in_channels(); ++c) {
      const double v = static_cast<double>(p.weights(r, c));
      std::fwrite(&v, sizeof(double), 1, f);
    }
  std::fclose(f);
}

template <typename Scalar>
LinearProjection<Scalar> load_projection(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open for read: " + path);
  unsigned char hdr[8];
  if (std::fread(hdr, 1, 8, f) != 8 || hdr[0] != 'T' || hdr[1] != 'C' ||
      hdr[2] != 'T' || hdr[3] != 'W') {
    std::fclose(f);
    throw IoError("bad weight file header: " + path);
  }
  const int in = hdr[4] | (hdr[5] << 8);
  const int out = hdr[6] | (hdr[7] << 8);
  LinearProjection<Scalar> p;
  p.weights.resize(out, in);
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) {
      double v;
      if (std::fread(&v, sizeof(double), 1, f) != 1) {
        std::fclose(f);
        throw IoError("truncated weight file: " + path);
      }
      p.weights(r, c) = static_cast<Scalar>(v);
    }
  std::fclose(f);
  return p;
}

}  // namespace tct
