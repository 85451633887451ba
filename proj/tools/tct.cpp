// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: run tracking experiments on synthetic scenes,
// sweep the ablation grid, and export response maps.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tct/harness.hpp"

namespace fs = std::filesystem;
using namespace tct;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const Matrix<double>& m, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) f << ',';
      f << fmt(m(i, j));
    }
    f << '\n';
  }
}

Matrix<double> read_matrix_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const auto comma = line.find(',', pos);
      const std::string cell =
          line.substr(pos, comma == std::string::npos ? comma : comma - pos);
      row.push_back(std::stod(cell));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empty matrix file " + path.string());
  Matrix<double> m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw IoError("ragged matrix file " + path.string());
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

/// 8-bit binary portable graymap of the min-max-normalized map; a constant
/// map becomes uniform mid-gray (128).
void write_pgm(const Matrix<double>& m, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << "P5\n" << m.cols() << " " << m.rows() << "\n255\n";
  const double lo = m.minCoeff(), hi = m.maxCoeff();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) {
      unsigned char v = 128;
      if (hi > lo)
        v = static_cast<unsigned char>(
            std::lround(255.0 * (m(i, j) - lo) / (hi - lo)));
      f.put(static_cast<char>(v));
    }
}

std::string frame_name(std::size_t t, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04zu.%s", t, ext);
  return buf;
}

struct TrackArgs {
  std::string scene;
  std::string tracker;
  std::string mode;
  std::string pipeline;
  std::string out;
  std::int64_t seed = -1;
  std::vector<std::string> exports;
};

TrackerConfig resolve_config(const TrackArgs& a) {
  TrackerConfig cfg;
  if (!a.tracker.empty())
    cfg = parse_tracker_config(KeyValueFile::parse_file(a.tracker));
  if (!a.mode.empty()) cfg.mode = parse_mode(a.mode);
  if (!a.pipeline.empty()) cfg.pipeline = parse_pipeline(a.pipeline);
  return cfg;
}

int cmd_track(const TrackArgs& a) {
  if (!fs::exists(a.scene)) throw ConfigError("scene file not found: " + a.scene);
  SceneSpec spec = parse_scene_file(a.scene);
  if (a.seed >= 0) spec.seed = static_cast<std::uint64_t>(a.seed);
  const TrackerConfig cfg = resolve_config(a);

  const bool want_responses =
      std::count(a.exports.begin(), a.exports.end(), "responses") > 0;
  const bool want_masks =
      std::count(a.exports.begin(), a.exports.end(), "masks") > 0;
  for (const auto& e : a.exports)
    if (e != "responses" && e != "masks")
      throw ConfigError("unknown export kind '" + e + "'");

  const auto frames = generate(spec);
  TrackTrace trace;
  const bool need_trace = want_responses || want_masks;
  const auto result =
      track(frames, spec.target_radius, cfg, need_trace ? &trace : nullptr);

  fs::create_directories(a.out);
  {
    std::ofstream f(fs::path(a.out) / "result.csv");
    if (!f) throw IoError("cannot write result.csv");
    f << "frame,row,col,iou\n";
    for (std::size_t t = 0; t < result.centers.size(); ++t)
      f << t << ',' << result.centers[t].first << ','
        << result.centers[t].second << ',' << fmt(result.overlaps[t]) << '\n';
  }
  if (want_responses) {
    fs::create_directories(fs::path(a.out) / "responses");
    for (std::size_t t = 0; t < trace.responses.size(); ++t)
      write_matrix_csv(trace.responses[t], fs::path(a.out) / "responses" /
                                               frame_name(t + 1, "csv"));
  }
  if (want_masks && !trace.transported_masks.empty()) {
    fs::create_directories(fs::path(a.out) / "masks");
    for (std::size_t t = 0; t < trace.transported_masks.size(); ++t) {
      Matrix<double> m(spec.height, spec.width);
      for (int i = 0; i < spec.height; ++i)
        for (int j = 0; j < spec.width; ++j)
          m(i, j) = trace.transported_masks[t][i * spec.width + j];
      write_matrix_csv(m,
                       fs::path(a.out) / "masks" / frame_name(t + 1, "csv"));
    }
  }

  std::cout << "ao,sr50,sr75,encoder_invocations\n"
            << fmt(result.ao) << ',' << fmt(result.sr50) << ','
            << fmt(result.sr75) << ',' << result.encoder_invocations << '\n';
  return 0;
}

int cmd_ablation(const std::string& suite_dir, const std::string& tracker,
                 const std::string& out) {
  if (!fs::is_directory(suite_dir))
    throw ConfigError("suite directory not found: " + suite_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(suite_dir))
    if (entry.path().extension() == ".scene") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ConfigError("no .scene files in " + suite_dir);

  std::vector<SceneSpec> suite;
  for (const auto& f : files) suite.push_back(parse_scene_file(f.string()));

  TrackerConfig base;
  if (!tracker.empty())
    base = parse_tracker_config(KeyValueFile::parse_file(tracker));

  std::vector<TrackerConfig> modes;
  for (Pipeline p : {Pipeline::Siamese, Pipeline::Dcf})
    for (TransformerMode m :
         {TransformerMode::Off, TransformerMode::EncoderOnly,
          TransformerMode::MaskOnly, TransformerMode::FeatureOnly,
          TransformerMode::Full}) {
      TrackerConfig cfg = base;
      cfg.pipeline = p;
      cfg.mode = m;
      modes.push_back(cfg);
    }
  const auto rows = run_ablation(suite, modes);

  fs::create_directories(out);
  std::ofstream f(fs::path(out) / "ablation.csv");
  if (!f) throw IoError("cannot write ablation.csv");
  f << "pipeline,mode,ao,sr50,sr75\n";
  for (const auto& r : rows)
    f << to_string(r.pipeline) << ',' << to_string(r.mode) << ','
      << fmt(r.ao) << ',' << fmt(r.sr50) << ',' << fmt(r.sr75) << '\n';

  std::cout << "pipeline,mode,ao,sr50,sr75\n";
  for (const auto& r : rows)
    std::cout << to_string(r.pipeline) << ',' << to_string(r.mode) << ','
              << fmt(r.ao) << ',' << fmt(r.sr50) << ',' << fmt(r.sr75) << '\n';
  return 0;
}

int cmd_export_response(const std::string& run_dir) {
  const fs::path responses = fs::path(run_dir) / "responses";
  if (!fs::is_directory(responses))
    throw IoError("no responses/ directory under " + run_dir +
                  " (run `track --export responses` first)");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(responses))
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no response CSVs under " + run_dir);
  for (const auto& f : files) {
    fs::path out = f;
    out.replace_extension(".pgm");
    write_pgm(read_matrix_csv(f), out);
  }
  std::cout << "exported," << files.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal-context transformer tracking on synthetic scenes"};
  app.require_subcommand(1);

  TrackArgs ta;
  auto* track_cmd = app.add_subcommand("track", "run one tracking session");
  track_cmd->add_option("--scene", ta.scene, "scene file")->required();
  track_cmd->add_option("--tracker", ta.tracker, "tracker config file");
  track_cmd->add_option("--mode", ta.mode,
                        "transformer mode: off|encoder|mask|feature|full");
  track_cmd->add_option("--pipeline", ta.pipeline, "siamese|dcf");
  track_cmd->add_option("--seed", ta.seed, "scene seed override");
  track_cmd->add_option("--out", ta.out, "output directory")->required();
  track_cmd->add_option("--export", ta.exports,
                        "per-frame exports: responses, masks");

  std::string suite_dir, ab_tracker, ab_out;
  auto* ab_cmd = app.add_subcommand("ablation", "run the mode/pipeline grid");
  ab_cmd->add_option("--suite", suite_dir, "directory of .scene files")
      ->required();
  ab_cmd->add_option("--tracker", ab_tracker, "base tracker config file");
  ab_cmd->add_option("--out", ab_out, "output directory")->required();

  std::string run_dir;
  auto* ex_cmd =
      app.add_subcommand("export-response", "convert response CSVs to P5 PGM");
  ex_cmd->add_option("--run", run_dir, "completed run directory")->required();

  try {
    app.parse(argc, argv);
    if (track_cmd->parsed()) return cmd_track(ta);
    if (ab_cmd->parsed()) return cmd_ablation(suite_dir, ab_tracker, ab_out);
    if (ex_cmd->parsed()) return cmd_export_response(run_dir);
    return 2;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
