// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "tct/kvfile.hpp"
#include "tct/rng.hpp"
#include "tct/tensor.hpp"

namespace tct {

enum class MotionModel { Linear, Sinusoidal, RandomWalk };

struct MotionSpec {
  MotionModel model = MotionModel::Linear;
  double start_row = 0, start_col = 0;
  double vel_row = 0, vel_col = 0;      // linear: cells per frame
  double amp_row = 0, amp_col = 0;      // sinusoidal amplitude, cells
  double period = 30;                   // sinusoidal period, frames
  double step_sigma = 0;                // random walk step, cells
};

struct DistractorSpec {
  double rho = 0.8;  // cosine similarity to the target signature
  MotionSpec motion;
  int start = 0;   // first frame the distractor is present
  int end = -1;    // last frame (inclusive); -1 = until the sequence ends
};

/// Everything needed to deterministically synthesize a feature sequence.
/// Features are generated directly in embedding space; the target (and any
/// distractors) occupy square patches of cells carrying their signatures.
struct SceneSpec {
  std::uint64_t seed = 1;
  int frames = 50;
  int height = 12, width = 12;
  int channels = 8;
  int target_radius = 1;  // square patch (2r+1)^2
  MotionSpec motion;
  std::vector<DistractorSpec> distractors;
  std::vector<std::pair<int, int>> occlusions;  // inclusive frame ranges
  double noise_sigma = 0;
  double drift_rate = 0;  // appearance drift per frame
};

struct SyntheticFrame {
  FeatureMap<double> feature;
  int center_row = 0;
  int center_col = 0;
  bool visible = true;
};

namespace detail {

// Counter namespaces for the scene RNG streams.
enum : std::uint64_t {
  kSignature = 1,
  kDrift = 2,
  kOccluder = 3,
  kDistractorBase = 16,
  kWalk = 1u << 20,
  kNoise = 1u << 21,
};

inline Vector<double> unit_vector(const CounterRng& rng, std::uint64_t ns,
                                  int dim) {
  Vector<double> v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal(ns * 4096 + i);
  const double n = v.norm();
  if (n < 1e-12) throw ParameterError("degenerate random direction");
  return v / n;
}

inline Vector<double> unit_orthogonal_to(const CounterRng& rng,
                                         std::uint64_t ns,
                                         const Vector<double>& base, int dim) {
  if (dim < 2)
    throw ParameterError("need at least 2 channels for an orthogonal vector");
  Vector<double> v = unit_vector(rng, ns, dim);
  v -= v.dot(base) * base;
  const double n = v.norm();
  if (n < 1e-9) return unit_orthogonal_to(rng, ns + 1, base, dim);
  return v / n;
}

inline double reflect_into(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0) return lo;
  double t = std::fmod(x - lo, 2 * span);
  if (t < 0) t += 2 * span;
  return lo + (t <= span ? t : 2 * span - t);
}

inline std::pair<double, double> position_at(const MotionSpec& m, int frame,
                                             const CounterRng& rng,
                                             std::uint64_t walk_ns, double lo_r,
                                             double hi_r, double lo_c,
                                             double hi_c) {
  switch (m.model) {
    case MotionModel::Linear:
      return {m.start_row + m.vel_row * frame, m.start_col + m.vel_col * frame};
    case MotionModel::Sinusoidal: {
      const double w = 2.0 * M_PI / m.period;
      return {m.start_row + m.amp_row * std::sin(w * frame),
              m.start_col + m.amp_col * std::sin(w * frame)};
    }
    case MotionModel::RandomWalk: {
      // Cumulative seeded steps, reflected at the borders; replayable for any
      // frame in isolation by summing the per-frame steps.
      double r = m.start_row, c = m.start_col;
      for (int t = 1; t <= frame; ++t) {
        r += m.step_sigma * rng.normal(walk_ns + 2 * t);
        c += m.step_sigma * rng.normal(walk_ns + 2 * t + 1);
      }
      return {reflect_into(r, lo_r, hi_r), reflect_into(c, lo_c, hi_c)};
    }
  }
  throw ParameterError("unknown motion model");
}

}  // namespace detail

/// Deterministic sequence generation: bit-identical for identical specs.
/// Target cells carry normalize(signature + t * drift * direction) plus
/// noise; occluded frames swap in an occluder signature and mark the frame
/// invisible. Distractor signatures are mixed to an exact cosine rho with
/// the target signature.
inline std::vector<SyntheticFrame> generate(const SceneSpec& spec) {
  if (spec.frames <= 0 || spec.height <= 0 || spec.width <= 0 ||
      spec.channels <= 0)
    throw ParameterError("scene dimensions must be positive");
  if (spec.target_radius < 0 ||
      2 * spec.target_radius + 1 > std::min(spec.height, spec.width))
    throw ParameterError("target radius does not fit the grid");
  if (spec.noise_sigma < 0) throw ParameterError("noise sigma must be >= 0");
  for (const auto& d : spec.distractors)
    if (d.rho < 0 || d.rho > 1)
      throw ParameterError("distractor rho must lie in [0,1]");
  for (const auto& [s, e] : spec.occlusions)
    if (s < 0 || e < s) throw ParameterError("invalid occlusion window");

  const CounterRng rng(spec.seed);
  const int C = spec.channels, H = spec.height, W = spec.width;
  const int r = spec.target_radius;
  const double lo_r = r, hi_r = H - 1 - r, lo_c = r, hi_c = W - 1 - r;

  const Vector<double> signature =
      detail::unit_vector(rng, detail::kSignature, C);
  const Vector<double> drift_dir =
      detail::unit_orthogonal_to(rng, detail::kDrift, signature, C);
  const Vector<double> occluder =
      detail::unit_orthogonal_to(rng, detail::kOccluder, signature, C);

  std::vector<Vector<double>> distractor_sigs;
  for (std::size_t i = 0; i < spec.distractors.size(); ++i) {
    const double rho = spec.distractors[i].rho;
    const Vector<double> u = detail::unit_orthogonal_to(
        rng, detail::kDistractorBase + i, signature, C);
    distractor_sigs.push_back(rho * signature +
                              std::sqrt(1.0 - rho * rho) * u);
  }

  auto occluded = [&](int t) {
    for (const auto& [s, e] : spec.occlusions)
      if (t >= s && t <= e) return true;
    return false;
  };

  auto paint = [&](FeatureMap<double>& fm, int cy, int cx,
                   const Vector<double>& sig) {
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const int y = cy + dy, x = cx + dx;
        if (y < 0 || y >= H || x < 0 || x >= W) continue;
        for (int c = 0; c < C; ++c) fm.at(c, y, x) += sig[c];
      }
  };

  std::vector<SyntheticFrame> frames;
  frames.reserve(spec.frames);
  for (int t = 0; t < spec.frames; ++t) {
    auto [pr, pc] = detail::position_at(spec.motion, t, rng, detail::kWalk,
                                        lo_r, hi_r, lo_c, hi_c);
    const int cy = static_cast<int>(std::lround(pr));
    const int cx = static_cast<int>(std::lround(pc));
    if (cy < 0 || cy >= H || cx < 0 || cx >= W)
      throw ParameterError("target trajectory leaves the grid at frame " +
                           std::to_string(t));

    SyntheticFrame frame;
    frame.feature = FeatureMap<double>(C, H, W);
    frame.center_row = cy;
    frame.center_col = cx;
    frame.visible = !occluded(t);

    Vector<double> appearance = signature + t * spec.drift_rate * drift_dir;
    appearance /= appearance.norm();
    paint(frame.feature, cy, cx, frame.visible ? appearance : occluder);

    for (std::size_t i = 0; i < spec.distractors.size(); ++i) {
      const auto& dspec = spec.distractors[i];
      if (t < dspec.start || (dspec.end >= 0 && t > dspec.end)) continue;
      auto [dr, dc] = detail::position_at(
          spec.distractors[i].motion, t, rng,
          detail::kWalk + 4096 * (i + 1), lo_r, hi_r, lo_c, hi_c);
      const int dy = static_cast<int>(std::lround(dr));
      const int dx = static_cast<int>(std::lround(dc));
      if (dy < 0 || dy >= H || dx < 0 || dx >= W)
        throw ParameterError("distractor trajectory leaves the grid at frame " +
                             std::to_string(t));
      paint(frame.feature, dy, dx, distractor_sigs[i]);
    }

    if (spec.noise_sigma > 0) {
      // noise_sigma is relative to the unit-norm cell embeddings: per-channel
      // std sigma/sqrt(C), so the expected noise norm per cell is sigma.
      const double per_channel = spec.noise_sigma / std::sqrt(double(C));
      std::uint64_t ctr =
          detail::kNoise + static_cast<std::uint64_t>(t) * C * H * W * 4;
      for (Eigen::Index k = 0; k < frame.feature.data.size(); ++k)
        frame.feature.data[k] += per_channel * rng.normal(ctr + k);
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Scene file format: plain "key = value" text. Keys:
//   seed, frames, height, width, channels, target_radius,
//   noise_sigma, drift_rate,
//   motion.model = linear | sinusoidal | random_walk
//   motion.start_row, motion.start_col, motion.vel_row, motion.vel_col,
//   motion.amp_row, motion.amp_col, motion.period, motion.step_sigma,
//   distractors = <count>, distractor<i>.rho plus distractor<i>.<motion keys>
//     and optional distractor<i>.start / distractor<i>.end (inclusive frame
//     window in which the distractor is present; defaults to the whole
//     sequence),
//   occlusions = <count>, occlusion<i>.start, occlusion<i>.end
// Unknown keys are hard errors.
// ---------------------------------------------------------------------------

namespace detail {

inline MotionModel parse_motion_model(const std::string& s) {
  if (s == "linear") return MotionModel::Linear;
  if (s == "sinusoidal") return MotionModel::Sinusoidal;
  if (s == "random_walk") return MotionModel::RandomWalk;
  throw ConfigError("unknown motion model '" + s + "'");
}

inline void motion_keys(const std::string& prefix,
                        std::vector<std::string>& out) {
  for (const char* k : {"model", "start_row", "start_col", "vel_row", "vel_col",
                        "amp_row", "amp_col", "period", "step_sigma"})
    out.push_back(prefix + k);
}

inline MotionSpec parse_motion(const KeyValueFile& kv,
                               const std::string& prefix) {
  MotionSpec m;
  m.model = parse_motion_model(kv.string_or(prefix + "model", "linear"));
  m.start_row = kv.get_real(prefix + "start_row");
  m.start_col = kv.get_real(prefix + "start_col");
  m.vel_row = kv.real_or(prefix + "vel_row", 0);
  m.vel_col = kv.real_or(prefix + "vel_col", 0);
  m.amp_row = kv.real_or(prefix + "amp_row", 0);
  m.amp_col = kv.real_or(prefix + "amp_col", 0);
  m.period = kv.real_or(prefix + "period", 30);
  m.step_sigma = kv.real_or(prefix + "step_sigma", 0);
  return m;
}

}  // namespace detail

inline SceneSpec parse_scene(const KeyValueFile& kv) {
  SceneSpec s;
  s.seed = kv.u64_or("seed", 1);
  s.frames = static_cast<int>(kv.get_int("frames"));
  s.height = static_cast<int>(kv.get_int("height"));
  s.width = static_cast<int>(kv.get_int("width"));
  s.channels = static_cast<int>(kv.get_int("channels"));
  s.target_radius = static_cast<int>(kv.int_or("target_radius", 1));
  s.noise_sigma = kv.real_or("noise_sigma", 0);
  s.drift_rate = kv.real_or("drift_rate", 0);
  s.motion = detail::parse_motion(kv, "motion.");

  std::vector<std::string> allowed = {
      "seed",          "frames",     "height",     "width",
      "channels",      "target_radius", "noise_sigma", "drift_rate",
      "distractors",   "occlusions"};
  detail::motion_keys("motion.", allowed);

  const long n_dis = kv.int_or("distractors", 0);
  for (long i = 0; i < n_dis; ++i) {
    const std::string prefix = "distractor" + std::to_string(i) + ".";
    DistractorSpec d;
    d.rho = kv.get_real(prefix + "rho");
    d.motion = detail::parse_motion(kv, prefix);
    d.start = static_cast<int>(kv.int_or(prefix + "start", 0));
    d.end = static_cast<int>(kv.int_or(prefix + "end", -1));
    s.distractors.push_back(d);
    allowed.push_back(prefix + "rho");
    allowed.push_back(prefix + "start");
    allowed.push_back(prefix + "end");
    detail::motion_keys(prefix, allowed);
  }
  const long n_occ = kv.int_or("occlusions", 0);
  for (long i = 0; i < n_occ; ++i) {
    const std::string prefix = "occlusion" + std::to_string(i) + ".";
    s.occlusions.emplace_back(
        static_cast<int>(kv.get_int(prefix + "start")),
        static_cast<int>(kv.get_int(prefix + "end")));
    allowed.push_back(prefix + "start");
    allowed.push_back(prefix + "end");
  }
  kv.ensure_only(allowed);
  return s;
}

inline SceneSpec parse_scene_file(const std::string& path) {
  return parse_scene(KeyValueFile::parse_file(path));
}

/// Flat binary replay format: i32 counts (frames, C, H, W) then per frame
/// i32 center_row, i32 center_col, i32 visible and C*H*W float64 values.
inline void write_sequence(const std::vector<SyntheticFrame>& frames,
                           const std::string& path) {
  if (frames.empty()) throw ParameterError("empty sequence");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open for write: " + path);
  auto w32 = [&](std::int32_t v) { std::fwrite(&v, 4, 1, f); };
  const auto& f0 = frames.front().feature;
  w32(static_cast<std::int32_t>(frames.size()));
  w32(f0.channels);
  w32(f0.height);
  w32(f0.width);
  for (const auto& fr : frames) {
    w32(fr.center_row);
    w32(fr.center_col);
    w32(fr.visible ? 1 : 0);
    std::fwrite(fr.feature.data.data(), sizeof(double), fr.feature.data.size(),
                f);
  }
  std::fclose(f);
}

inline std::vector<SyntheticFrame> read_sequence(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open for read: " + path);
  auto r32 = [&]() {
    std::int32_t v;
    if (std::fread(&v, 4, 1, f) != 1) {
      std::fclose(f);
      throw IoError("truncated sequence file: " + path);
    }
    return v;
  };
  const int n = r32(), c = r32(), h = r32(), w = r32();
  std::vector<SyntheticFrame> frames;
  for (int i = 0; i < n; ++i) {
    SyntheticFrame fr;
    fr.center_row = r32();
    fr.center_col = r32();
    fr.visible = r32() != 0;
    fr.feature = FeatureMap<double>(c, h, w);
    if (std::fread(fr.feature.data.data(), sizeof(double),
                   fr.feature.data.size(), f) !=
        static_cast<std::size_t>(fr.feature.data.size())) {
      std::fclose(f);
      throw IoError("truncated sequence file: " + path);
    }
    frames.push_back(std::move(fr));
  }
  std::fclose(f);
  return frames;
}

}  // namespace tct
