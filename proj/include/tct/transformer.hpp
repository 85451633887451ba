// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>

#include "tct/attention.hpp"
#include "tct/memory.hpp"
#include "tct/tensor.hpp"

namespace tct {

/// Shared configuration for the encoder/decoder pair. The encoder's and the
/// decoder's self-attention use the SAME projection object (shared_ptr
/// identity), mirroring the block weight-sharing between the two branches.
template <typename Scalar>
struct TransformerConfig {
  Scalar tau = Scalar(1) / Scalar(30);
  Scalar eps = Scalar(1e-12);
  int channels = 0;
  std::shared_ptr<const LinearProjection<Scalar>> self_projection;   // phi
  std::shared_ptr<const LinearProjection<Scalar>> cross_projection;  // phi'

  static TransformerConfig orthonormal_init(int channels, std::uint64_t seed,
                                            Scalar tau = Scalar(1) /
                                                         Scalar(30)) {
    TransformerConfig cfg;
    cfg.channels = channels;
    cfg.tau = tau;
    cfg.self_projection = std::make_shared<LinearProjection<Scalar>>(
        LinearProjection<Scalar>::orthonormal(channels, seed));
    cfg.cross_projection = std::make_shared<LinearProjection<Scalar>>(
        LinearProjection<Scalar>::orthonormal(channels, seed + 1));
    return cfg;
  }

  static TransformerConfig uniform_init(int channels, std::uint64_t seed,
                                        Scalar tau = Scalar(1) / Scalar(30)) {
    TransformerConfig cfg;
    cfg.channels = channels;
    cfg.tau = tau;
    cfg.self_projection = std::make_shared<LinearProjection<Scalar>>(
        LinearProjection<Scalar>::seeded_uniform(channels, seed));
    cfg.cross_projection = std::make_shared<LinearProjection<Scalar>>(
        LinearProjection<Scalar>::seeded_uniform(channels, seed + 1));
    return cfg;
  }
};

/// Encoded template ensemble: (n*H*W) x C embeddings plus shape metadata so
/// the tensor form n x C x H x W can be recovered losslessly.
template <typename Scalar>
struct EncodedTemplates {
  Matrix<Scalar> embeddings;
  int count = 0;
  int channels = 0;
  int height = 0;
  int width = 0;

  Eigen::Index block_rows() const {
    return static_cast<Eigen::Index>(height) * width;
  }

  /// Reshapes template block i back to its C x H x W tensor.
  FeatureMap<Scalar> block(int i) const {
    if (i < 0 || i >= count) throw OutOfBoundsError("template block index");
    Matrix<Scalar> emb = embeddings.middleRows(block_rows() * i, block_rows());
    return feature_map_from_embeddings(emb, height, width);
  }
};

/// Decoded search patch: (H*W) x C embeddings with shape metadata.
template <typename Scalar>
struct DecodedSearch {
  Matrix<Scalar> embeddings;
  int height = 0;
  int width = 0;

  FeatureMap<Scalar> feature_map() const {
    return feature_map_from_embeddings(embeddings, height, width);
  }
};

/// Wraps raw (unencoded) templates in the EncodedTemplates container; the
/// ablation baseline path where the encoder is bypassed.
template <typename Scalar>
EncodedTemplates<Scalar> passthrough_templates(
    const TemplateEnsemble<Scalar>& ensemble) {
  if (ensemble.size() == 0) throw EmptyEnsembleError("empty template ensemble");
  const auto& front = ensemble.templates.front();
  return {ensemble.embeddings(), ensemble.size(), front.channels, front.height,
          front.width};
}

/// Encoder: self-attention over the concatenated template embeddings,
/// residual add, then patch-level instance normalization per template block.
template <typename Scalar>
EncodedTemplates<Scalar> encode(const TemplateEnsemble<Scalar>& ensemble,
                                const TransformerConfig<Scalar>& cfg) {
  if (ensemble.size() == 0) throw EmptyEnsembleError("empty template ensemble");
  const auto& front = ensemble.templates.front();
  if (front.channels != cfg.channels)
    throw DimensionError("ensemble channels do not match config");
  const Matrix<Scalar> t = ensemble.embeddings();
  const Matrix<Scalar> p = project(*cfg.self_projection, t);
  const Matrix<Scalar> a = attention(p, p, cfg.tau, cfg.eps);
  Matrix<Scalar> encoded = instance_normalize<Scalar>(
      transform_values(a, t) + t, cfg.eps, front.plane());
  return {std::move(encoded), ensemble.size(), front.channels, front.height,
          front.width};
}

/// Decoder self-attention over the search embeddings, residual add, then
/// instance normalization over the whole patch. Shares phi with the encoder.
template <typename Scalar>
Matrix<Scalar> decode_self(const FeatureMap<Scalar>& search,
                           const TransformerConfig<Scalar>& cfg) {
  if (search.channels != cfg.channels)
    throw DimensionError("search channels do not match config");
  const Matrix<Scalar> s = reshape_to_embeddings(search);
  const Matrix<Scalar> p = project(*cfg.self_projection, s);
  const Matrix<Scalar> a = attention(p, p, cfg.tau, cfg.eps);
  return instance_normalize<Scalar>(transform_values(a, s) + s, cfg.eps);
}

/// Cross-attention from encoded templates (keys) to search embeddings
/// (queries): N_S x N_T, row-stochastic.
template <typename Scalar>
Matrix<Scalar> cross_attention(const Matrix<Scalar>& s_hat,
                               const EncodedTemplates<Scalar>& t_hat,
                               const TransformerConfig<Scalar>& cfg) {
  return attention(project(*cfg.cross_projection, s_hat),
                   project(*cfg.cross_projection, t_hat.embeddings), cfg.tau,
                   cfg.eps);
}

/// Mask transformation: propagate the template masks through the
/// cross-attention, broadcast-multiply onto the search embeddings, normalize.
template <typename Scalar>
Matrix<Scalar> propagate_mask(const Matrix<Scalar>& a, const Vector<Scalar>& m,
                              const Matrix<Scalar>& s_hat,
                              Scalar eps = Scalar(1e-12)) {
  if (a.cols() != m.size())
    throw DimensionError("attention keys do not match mask length");
  if (a.rows() != s_hat.rows())
    throw DimensionError("attention queries do not match search rows");
  const Vector<Scalar> transported = a * m;  // convex combination, stays [0,1]
  Matrix<Scalar> masked = s_hat.array().colwise() * transported.array();
  return instance_normalize<Scalar>(masked, eps);
}

/// Feature transformation: background-suppressed template features
/// transported to search coordinates, added as a residual, normalized.
template <typename Scalar>
Matrix<Scalar> propagate_features(const Matrix<Scalar>& a,
                                  const EncodedTemplates<Scalar>& t_hat,
                                  const Vector<Scalar>& m,
                                  const Matrix<Scalar>& s_hat,
                                  Scalar eps = Scalar(1e-12)) {
  if (a.cols() != t_hat.embeddings.rows() || a.cols() != m.size())
    throw DimensionError("attention keys do not match template rows");
  if (a.rows() != s_hat.rows())
    throw DimensionError("attention queries do not match search rows");
  const Matrix<Scalar> masked_t =
      t_hat.embeddings.array().colwise() * m.array();
  return instance_normalize<Scalar>(a * masked_t + s_hat, eps);
}

struct DecodeBranches {
  bool mask = true;
  bool feature = true;
};

/// Full decoder pipeline: self-attention, then the mask and feature
/// transformations combined and normalized. Branch switches reproduce the
/// ablation paths (both off: self-attention output only; one on: that
/// branch's output alone).
template <typename Scalar>
DecodedSearch<Scalar> decode(const FeatureMap<Scalar>& search,
                             const EncodedTemplates<Scalar>& t_hat,
                             const Vector<Scalar>& m,
                             const TransformerConfig<Scalar>& cfg,
                             DecodeBranches branches = {},
                             Vector<Scalar>* transported_mask_out = nullptr) {
  Matrix<Scalar> s_hat = decode_self(search, cfg);
  if (!branches.mask && !branches.feature)
    return {std::move(s_hat), search.height, search.width};
  const Matrix<Scalar> a = cross_attention(s_hat, t_hat, cfg);
  if (transported_mask_out) *transported_mask_out = a * m;
  if (branches.mask && !branches.feature)
    return {propagate_mask(a, m, s_hat, cfg.eps), search.height, search.width};
  if (!branches.mask && branches.feature)
    return {propagate_features(a, t_hat, m, s_hat, cfg.eps), search.height,
            search.width};
  const Matrix<Scalar> s_mask = propagate_mask(a, m, s_hat, cfg.eps);
  const Matrix<Scalar> s_feat = propagate_features(a, t_hat, m, s_hat, cfg.eps);
  return {instance_normalize<Scalar>(s_feat + s_mask, cfg.eps), search.height,
          search.width};
}

}  // namespace tct
