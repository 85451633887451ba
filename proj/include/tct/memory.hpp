// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "tct/tensor.hpp"

namespace tct {

/// Ordered ensemble of template feature maps with their Gaussian masks and
/// target centers (grid cells), oldest first. Online updates add a template
/// every `interval` frames and evict index 0 at capacity.
template <typename Scalar>
struct TemplateEnsemble {
  std::vector<FeatureMap<Scalar>> templates;
  std::vector<Vector<Scalar>> masks;  // one H*W mask per template, in [0,1]
  std::vector<std::pair<int, int>> centers;  // (row, col) target cell
  int max_size = 20;
  int interval = 5;

  static TemplateEnsemble init(FeatureMap<Scalar> first_template,
                               Vector<Scalar> first_mask,
                               std::pair<int, int> first_center,
                               int max_size = 20, int interval = 5) {
    if (max_size < 1 || interval < 1)
      throw ParameterError("max_size and interval must be >= 1");
    if (first_mask.size() != first_template.plane())
      throw DimensionError("mask length must equal H*W");
    TemplateEnsemble e;
    e.max_size = max_size;
    e.interval = interval;
    e.templates.push_back(std::move(first_template));
    e.masks.push_back(std::move(first_mask));
    e.centers.push_back(first_center);
    return e;
  }

  int size() const { return static_cast<int>(templates.size()); }

  /// Adds (template, mask) iff frame_index > 0 and frame_index % interval == 0,
  /// evicting the oldest entry at capacity. Returns true when the ensemble
  /// changed, which is the caller's cue to re-run the encoder.
  bool maybe_update(const FeatureMap<Scalar>& t, const Vector<Scalar>& mask,
                    std::pair<int, int> center, long frame_index) {
    if (frame_index <= 0 || frame_index % interval != 0) return false;
    check_same_shape(templates.front(), t);
    if (mask.size() != t.plane())
      throw DimensionError("mask length must equal H*W");
    if (size() >= max_size) {
      templates.erase(templates.begin());
      masks.erase(masks.begin());
      centers.erase(centers.begin());
    }
    templates.push_back(t);
    masks.push_back(mask);
    centers.push_back(center);
    return true;
  }

  /// Concatenated (n*H*W) x C embedding matrix, template by template.
  Matrix<Scalar> embeddings() const { return concat_embeddings(templates); }

  /// Flattened mask ensemble M' of length n*H*W.
  Vector<Scalar> mask_vector() const {
    const Eigen::Index block = templates.front().plane();
    Vector<Scalar> m(block * size());
    for (int i = 0; i < size(); ++i) m.segment(block * i, block) = masks[i];
    return m;
  }
};

}  // namespace tct
