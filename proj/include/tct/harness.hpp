// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <utility>
#include <vector>

#include "tct/models.hpp"
#include "tct/synth.hpp"
#include "tct/transformer.hpp"

namespace tct {

enum class Pipeline { Siamese, Dcf };
enum class TransformerMode { Off, EncoderOnly, MaskOnly, FeatureOnly, Full };
enum class WindowMode { None, Hann };

struct TrackerConfig {
  Pipeline pipeline = Pipeline::Siamese;
  TransformerMode mode = TransformerMode::Full;
  WindowMode window = WindowMode::None;
  double window_weight = 0.2;
  int interval = 5;
  int max_size = 20;
  double lambda = 1e-2;
  int kernel_size = 0;  // 0: derived from the init box
  double sigma_label = 0.1;
  double sigma_mask = 0.1;
  double tau = 1.0 / 30.0;
  double eps = 1e-12;
  std::uint64_t proj_seed = 1234;
  bool orthonormal_projections = true;
  bool confidence_gate = false;  // skip updates on weak peaks
  double gate_threshold = 0.25;
  bool oracle_masks = false;  // build update masks from ground truth
};

/// Axis-aligned box (top-left row/col plus extents) in real cell units.
struct Box {
  double row = 0, col = 0, h = 0, w = 0;
};

inline double iou(const Box& a, const Box& b) {
  if (a.h <= 0 || a.w <= 0 || b.h <= 0 || b.w <= 0)
    throw ParameterError("box extents must be positive");
  const double top = std::max(a.row, b.row);
  const double left = std::max(a.col, b.col);
  const double bottom = std::min(a.row + a.h, b.row + b.h);
  const double right = std::min(a.col + a.w, b.col + b.w);
  const double inter =
      std::max(0.0, bottom - top) * std::max(0.0, right - left);
  return inter / (a.h * a.w + b.h * b.w - inter);
}

struct TrackResult {
  std::vector<std::pair<int, int>> centers;  // predicted, per frame
  std::vector<Box> boxes;
  std::vector<double> overlaps;  // vs ground truth, per frame
  double ao = 0;
  double sr50 = 0;
  double sr75 = 0;
  int encoder_invocations = 0;
  int templates_stored = 0;  // ensemble size after the final frame
  double wall_time_sec = 0;
};

/// Optional per-frame artifacts collected during a run (for export). Frame 0
/// has no response; indices here start at frame 1.
struct TrackTrace {
  std::vector<Matrix<double>> responses;
  std::vector<Vector<double>> transported_masks;  // empty when decoder unused
};

namespace detail {

inline CellBox clamp_box(int center_row, int center_col, int k, int height,
                         int width) {
  int top = std::clamp(center_row - k / 2, 0, height - k);
  int left = std::clamp(center_col - k / 2, 0, width - k);
  return {top, left, k, k};
}

inline Matrix<double> hann_prior(int height, int width, int prev_row,
                                 int prev_col) {
  Matrix<double> w(height, width);
  const double half = std::max(height, width) / 2.0;
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const double d = std::hypot(double(i - prev_row), double(j - prev_col));
      const double t = std::min(d / half, 1.0);
      w(i, j) = 0.5 * (1.0 + std::cos(M_PI * t));
    }
  return w;
}

}  // namespace detail

/// Online tracking loop: initialize from frame 0's ground truth, then per
/// frame decode the search features, generate a response with the configured
/// pipeline, localize at the argmax, and refresh the template ensemble on the
/// interval schedule (re-encoding and re-solving the model only then).
/// Boxes are fixed at the initialization size (2*radius+1 square).
inline TrackResult track(const std::vector<SyntheticFrame>& seq,
                         int target_radius, const TrackerConfig& cfg,
                         TrackTrace* trace = nullptr) {
  if (seq.size() < 2) throw ParameterError("sequence needs at least 2 frames");
  const auto t0 = std::chrono::steady_clock::now();
  const auto& first = seq.front().feature;
  const int H = first.height, W = first.width, C = first.channels;
  const int box_k = std::min({2 * target_radius + 1, H, W});
  const int kernel_k =
      cfg.kernel_size > 0 ? std::min({cfg.kernel_size, H, W}) : box_k;

  TransformerConfig<double> tf;
  if (cfg.mode != TransformerMode::Off) {
    tf = cfg.orthonormal_projections
             ? TransformerConfig<double>::orthonormal_init(C, cfg.proj_seed,
                                                           cfg.tau)
             : TransformerConfig<double>::uniform_init(C, cfg.proj_seed,
                                                       cfg.tau);
    tf.eps = cfg.eps;
  }
  const bool use_decoder = cfg.mode == TransformerMode::MaskOnly ||
                           cfg.mode == TransformerMode::FeatureOnly ||
                           cfg.mode == TransformerMode::Full;
  const DecodeBranches branches{
      cfg.mode == TransformerMode::MaskOnly || cfg.mode == TransformerMode::Full,
      cfg.mode == TransformerMode::FeatureOnly ||
          cfg.mode == TransformerMode::Full};

  const int gt_row0 = seq.front().center_row;
  const int gt_col0 = seq.front().center_col;
  auto ensemble = TemplateEnsemble<double>::init(
      first, gaussian_mask_at_cell<double>(H, W, gt_row0, gt_col0,
                                           cfg.sigma_mask),
      {gt_row0, gt_col0}, cfg.max_size, cfg.interval);

  TrackResult result;
  auto encode_templates = [&]() {
    if (cfg.mode == TransformerMode::Off) return passthrough_templates(ensemble);
    ++result.encoder_invocations;
    return encode(ensemble, tf);
  };
  EncodedTemplates<double> encoded = encode_templates();

  auto make_labels = [&]() {
    std::vector<GaussianLabel<double>> labels;
    for (const auto& [r, c] : ensemble.centers)
      labels.push_back(gaussian_label<double>(
          H, W, {(r + 0.5) / H, (c + 0.5) / W}, cfg.sigma_label));
    return labels;
  };
  auto make_model = [&]() -> CorrelationKernel<double> {
    if (cfg.pipeline == Pipeline::Siamese) {
      const auto [cr, cc] = ensemble.centers.back();
      return crop_target_kernel(encoded,
                                detail::clamp_box(cr, cc, kernel_k, H, W));
    }
    return solve_dcf(encoded, make_labels(), cfg.lambda, kernel_k, kernel_k);
  };
  CorrelationKernel<double> model = make_model();

  auto box_at = [&](int r, int c) {
    auto b = detail::clamp_box(r, c, box_k, H, W);
    return Box{double(b.top), double(b.left), double(b.h), double(b.w)};
  };

  result.centers.push_back({gt_row0, gt_col0});
  result.boxes.push_back(box_at(gt_row0, gt_col0));
  result.overlaps.push_back(seq.front().visible ? 1.0 : 0.0);

  int prev_row = gt_row0, prev_col = gt_col0;
  double peak_sum = 0;
  int peak_count = 0;

  for (std::size_t t = 1; t < seq.size(); ++t) {
    const auto& frame = seq[t];
    FeatureMap<double> search_features;
    if (use_decoder) {
      Vector<double> transported;
      search_features =
          decode(frame.feature, encoded, ensemble.mask_vector(), tf, branches,
                 trace ? &transported : nullptr)
              .feature_map();
      if (trace) trace->transported_masks.push_back(std::move(transported));
    } else {
      // Off / encoder-only: the search side stays raw.
      search_features = frame.feature;
    }

    Matrix<double> response = cross_correlate(model, search_features);
    if (cfg.window == WindowMode::Hann) {
      const Matrix<double> prior = detail::hann_prior(H, W, prev_row, prev_col);
      response.array() *=
          (1.0 - cfg.window_weight) + cfg.window_weight * prior.array();
    }
    if (trace) trace->responses.push_back(response);
    const auto [pr, pc] = response_argmax(response);
    const double peak = response(pr, pc);

    result.centers.push_back({pr, pc});
    const Box predicted = box_at(pr, pc);
    result.boxes.push_back(predicted);
    const double overlap =
        frame.visible
            ? iou(predicted, box_at(frame.center_row, frame.center_col))
            : 0.0;
    result.overlaps.push_back(overlap);

    bool allow_update = true;
    if (cfg.confidence_gate && peak_count > 0)
      allow_update = peak >= cfg.gate_threshold * (peak_sum / peak_count);
    peak_sum += peak;
    ++peak_count;

    if (allow_update) {
      const int mr = cfg.oracle_masks ? frame.center_row : pr;
      const int mc = cfg.oracle_masks ? frame.center_col : pc;
      const bool updated = ensemble.maybe_update(
          frame.feature,
          gaussian_mask_at_cell<double>(H, W, mr, mc, cfg.sigma_mask), {mr, mc},
          static_cast<long>(t));
      if (updated) {
        encoded = encode_templates();
        model = make_model();
      }
    }
    prev_row = pr;
    prev_col = pc;
  }

  // Metrics over the tracked frames (the init frame is given, not predicted).
  double sum = 0;
  int above50 = 0, above75 = 0;
  const int n = static_cast<int>(seq.size()) - 1;
  for (std::size_t t = 1; t < seq.size(); ++t) {
    sum += result.overlaps[t];
    if (result.overlaps[t] > 0.5) ++above50;
    if (result.overlaps[t] > 0.75) ++above75;
  }
  result.ao = sum / n;
  result.sr50 = double(above50) / n;
  result.sr75 = double(above75) / n;
  result.templates_stored = static_cast<int>(ensemble.templates.size());
  result.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

struct AblationRow {
  Pipeline pipeline;
  TransformerMode mode;
  double ao = 0;
  double sr50 = 0;
  double sr75 = 0;
};

inline const char* to_string(Pipeline p) {
  return p == Pipeline::Siamese ? "siamese" : "dcf";
}

inline const char* to_string(TransformerMode m) {
  switch (m) {
    case TransformerMode::Off: return "off";
    case TransformerMode::EncoderOnly: return "encoder";
    case TransformerMode::MaskOnly: return "mask";
    case TransformerMode::FeatureOnly: return "feature";
    case TransformerMode::Full: return "full";
  }
  return "?";
}

/// Runs every config over every scene; scenes may run in parallel (capped by
/// `threads`, or the TCT_THREADS env var when 0), merged deterministically by
/// suite order.
inline std::vector<AblationRow> run_ablation(
    const std::vector<SceneSpec>& suite,
    const std::vector<TrackerConfig>& modes, int threads = 0) {
  if (suite.empty()) throw ParameterError("empty scene suite");
  if (modes.empty()) throw ParameterError("empty mode list");
  if (threads <= 0) {
    if (const char* env = std::getenv("TCT_THREADS")) threads = std::atoi(env);
    if (threads <= 0) threads = 1;
  }

  std::vector<AblationRow> rows;
  for (const auto& cfg : modes) {
    std::vector<double> aos(suite.size()), s50(suite.size()), s75(suite.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t i = next.fetch_add(1); i < suite.size();
           i = next.fetch_add(1)) {
        const auto frames = generate(suite[i]);
        const auto res = track(frames, suite[i].target_radius, cfg);
        aos[i] = res.ao;
        s50[i] = res.sr50;
        s75[i] = res.sr75;
      }
    };
    std::vector<std::thread> pool;
    const int nw = std::min<int>(threads, static_cast<int>(suite.size()));
    for (int i = 1; i < nw; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    AblationRow row{cfg.pipeline, cfg.mode, 0, 0, 0};
    for (std::size_t i = 0; i < suite.size(); ++i) {
      row.ao += aos[i];
      row.sr50 += s50[i];
      row.sr75 += s75[i];
    }
    row.ao /= suite.size();
    row.sr50 /= suite.size();
    row.sr75 /= suite.size();
    rows.push_back(row);
  }
  return rows;
}

inline Pipeline parse_pipeline(const std::string& s) {
  if (s == "siamese") return Pipeline::Siamese;
  if (s == "dcf") return Pipeline::Dcf;
  throw ConfigError("unknown pipeline '" + s + "'");
}

inline TransformerMode parse_mode(const std::string& s) {
  if (s == "off") return TransformerMode::Off;
  if (s == "encoder") return TransformerMode::EncoderOnly;
  if (s == "mask") return TransformerMode::MaskOnly;
  if (s == "feature") return TransformerMode::FeatureOnly;
  if (s == "full") return TransformerMode::Full;
  throw ConfigError("unknown transformer mode '" + s + "'");
}

// Tracker config file keys (all optional; see TrackerConfig defaults):
//   pipeline = siamese | dcf, mode = off | encoder | mask | feature | full,
//   window = none | hann, window_weight, interval, max_size, lambda,
//   kernel_size, sigma_label, sigma_mask, tau, eps, proj_seed,
//   proj_mode = orthonormal | uniform, confidence_gate, gate_threshold,
//   oracle_masks
inline TrackerConfig parse_tracker_config(const KeyValueFile& kv) {
  static const std::vector<std::string> allowed = {
      "pipeline",     "mode",        "window",          "window_weight",
      "interval",     "max_size",    "lambda",          "kernel_size",
      "sigma_label",  "sigma_mask",  "tau",             "eps",
      "proj_seed",    "proj_mode",   "confidence_gate", "gate_threshold",
      "oracle_masks"};
  kv.ensure_only(allowed);
  TrackerConfig cfg;
  cfg.pipeline = parse_pipeline(kv.string_or("pipeline", "siamese"));
  cfg.mode = parse_mode(kv.string_or("mode", "full"));
  const std::string win = kv.string_or("window", "none");
  if (win == "none")
    cfg.window = WindowMode::None;
  else if (win == "hann")
    cfg.window = WindowMode::Hann;
  else
    throw ConfigError("unknown window '" + win + "'");
  cfg.window_weight = kv.real_or("window_weight", cfg.window_weight);
  cfg.interval = static_cast<int>(kv.int_or("interval", cfg.interval));
  cfg.max_size = static_cast<int>(kv.int_or("max_size", cfg.max_size));
  cfg.lambda = kv.real_or("lambda", cfg.lambda);
  cfg.kernel_size = static_cast<int>(kv.int_or("kernel_size", cfg.kernel_size));
  cfg.sigma_label = kv.real_or("sigma_label", cfg.sigma_label);
  cfg.sigma_mask = kv.real_or("sigma_mask", cfg.sigma_mask);
  cfg.tau = kv.real_or("tau", cfg.tau);
  cfg.eps = kv.real_or("eps", cfg.eps);
  cfg.proj_seed = kv.u64_or("proj_seed", cfg.proj_seed);
  const std::string pm = kv.string_or("proj_mode", "orthonormal");
  if (pm == "orthonormal")
    cfg.orthonormal_projections = true;
  else if (pm == "uniform")
    cfg.orthonormal_projections = false;
  else
    throw ConfigError("unknown proj_mode '" + pm + "'");
  cfg.confidence_gate = kv.bool_or("confidence_gate", cfg.confidence_gate);
  cfg.gate_threshold = kv.real_or("gate_threshold", cfg.gate_threshold);
  cfg.oracle_masks = kv.bool_or("oracle_masks", cfg.oracle_masks);
  return cfg;
}

}  // namespace tct
