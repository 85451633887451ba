// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: eight release criteria, one pass/fail line each. Exits
// non-zero if any criterion fails. Paths to the CLI binary, the scene suite,
// and the docs are injected at compile time (see tests/CMakeLists.txt).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tct/harness.hpp"
#include "tct/rng.hpp"

namespace fs = std::filesystem;
using namespace tct;

namespace {

int g_failures = 0;
std::vector<std::string> g_notes;

void note(const std::string& s) { g_notes.push_back(s); }

void criterion(int number, const std::string& name,
               const std::function<bool()>& body) {
  g_notes.clear();
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = body();
  } catch (const std::exception& e) {
    note(std::string("exception: ") + e.what());
  }
  const double sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::printf("[%s] %d. %s (%.1fs)\n", ok ? "PASS" : "FAIL", number,
              name.c_str(), sec);
  if (!ok) {
    ++g_failures;
    for (const auto& n : g_notes) std::printf("       %s\n", n.c_str());
  }
}

Matrix<double> random_mat(int r, int c, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix<double> m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal(i * c + j);
  return m;
}

FeatureMap<double> random_fm(int c, int h, int w, std::uint64_t seed) {
  CounterRng rng(seed);
  FeatureMap<double> fm(c, h, w);
  for (Eigen::Index i = 0; i < fm.data.size(); ++i)
    fm.data[i] = rng.normal(i);
  return fm;
}

// ---------------------------------------------------------------------------
// 1. Attention algebra: 1000 randomized cases.
// ---------------------------------------------------------------------------
bool attention_algebra() {
  CounterRng rng(0xa77e);
  for (int t = 0; t < 1000; ++t) {
    const std::uint64_t s = 10000 + t;
    const int nq = 2 + int(rng.uniform(4 * t) * 6);
    const int nk = 2 + int(rng.uniform(4 * t + 1) * 7);
    const int d = 2 + int(rng.uniform(4 * t + 2) * 6);
    const auto q = random_mat(nq, d, 2 * s);
    const auto k = random_mat(nk, d, 2 * s + 1);
    const double tau = 0.1 + rng.uniform(4 * t + 3);
    const auto a = attention(q, k, tau);

    // row-stochastic, positive
    for (int r = 0; r < nq; ++r) {
      if (std::abs(a.row(r).sum() - 1.0) > 1e-9) {
        note("row sum off at case " + std::to_string(t));
        return false;
      }
      if (a.row(r).minCoeff() <= 0.0) {
        note("non-positive weight at case " + std::to_string(t));
        return false;
      }
    }
    // scale invariance (l2 normalization of queries and keys)
    const Matrix<double> q2 = 3.7 * q;
    const Matrix<double> k2 = 0.013 * k;
    if ((attention(q2, k2, tau) - a).cwiseAbs().maxCoeff() > 1e-12) {
      note("scale invariance broken at case " + std::to_string(t));
      return false;
    }
    // key-permutation equivariance (reverse permutation)
    Matrix<double> kp(nk, d);
    for (int i = 0; i < nk; ++i) kp.row(i) = k.row(nk - 1 - i);
    const auto ap = attention(q, kp, tau);
    for (int r = 0; r < nq; ++r)
      for (int i = 0; i < nk; ++i)
        if (std::abs(ap(r, i) - a(r, nk - 1 - i)) > 1e-12) {
          note("permutation equivariance broken at case " + std::to_string(t));
          return false;
        }
    // temperature monotonicity: sharper softmax concentrates each row
    const auto sharp = attention(q, k, tau / 6.0);
    for (int r = 0; r < nq; ++r)
      if (sharp.row(r).maxCoeff() < a.row(r).maxCoeff() - 1e-12) {
        note("temperature monotonicity broken at case " + std::to_string(t));
        return false;
      }
  }
  return true;
}

// ---------------------------------------------------------------------------
// 2. Transformer fixed points.
// ---------------------------------------------------------------------------
FeatureMap<double> uniform_fm(int c, int h, int w) {
  FeatureMap<double> fm(c, h, w);
  for (int i = 0; i < c; ++i)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) fm.at(i, y, x) = 0.5 + 0.1 * i;
  return fm;
}

FeatureMap<double> orthogonal_fm() {
  FeatureMap<double> fm(9, 3, 3);
  for (int i = 0; i < 9; ++i) fm.at(i, i / 3, i % 3) = 1.0;
  return fm;
}

TemplateEnsemble<double> single(const FeatureMap<double>& fm) {
  return TemplateEnsemble<double>::init(
      fm, Vector<double>::Ones(fm.plane()), {0, 0});
}

bool transformer_fixed_points() {
  // uniform-rows fixed point: identical embeddings are reproduced up to
  // instance normalization
  {
    const auto fm = uniform_fm(4, 3, 3);
    const auto cfg = TransformerConfig<double>::orthonormal_init(4, 77);
    const auto enc = encode(single(fm), cfg);
    const Matrix<double> want =
        instance_normalize(reshape_to_embeddings(fm), cfg.eps);
    if ((enc.embeddings - want).cwiseAbs().maxCoeff() > 1e-9) {
      note("uniform-rows fixed point violated");
      return false;
    }
    if (std::abs(enc.embeddings.norm() - 1.0) > 1e-9) {
      note("encoded templates not unit Frobenius norm");
      return false;
    }
  }
  // identity-mask pass-through: an all-ones mask transported by a
  // row-stochastic matrix stays all ones, so the masked branch returns the
  // (already normalized) self-attention output
  {
    const auto fm = random_fm(4, 3, 3, 8);
    const auto cfg = TransformerConfig<double>::orthonormal_init(4, 77);
    const auto enc = encode(single(fm), cfg);
    const auto s_hat = decode_self(fm, cfg);
    const auto a = cross_attention(s_hat, enc, cfg);
    const Vector<double> ones = Vector<double>::Ones(9);
    const auto same = propagate_mask(a, ones, s_hat, cfg.eps);
    if ((same - s_hat).cwiseAbs().maxCoeff() > 1e-9) {
      note("identity-mask pass-through violated");
      return false;
    }
  }
  // permutation mask transport: orthogonal per-pixel embeddings under
  // full-rank rotation projections transport the mask exactly
  {
    TransformerConfig<double> cfg;
    cfg.channels = 9;
    cfg.self_projection = std::make_shared<LinearProjection<double>>(
        LinearProjection<double>::orthonormal(9, 88, 9));
    cfg.cross_projection = std::make_shared<LinearProjection<double>>(
        LinearProjection<double>::orthonormal(9, 89, 9));
    const auto fm = orthogonal_fm();
    const auto enc = encode(single(fm), cfg);
    const auto a = cross_attention(enc.embeddings, enc, cfg);
    Vector<double> mask(9);
    for (int i = 0; i < 9; ++i) mask[i] = (i % 3) * 0.5;
    if ((Vector<double>(a * mask) - mask).cwiseAbs().maxCoeff() > 1e-6) {
      note("permutation mask transport beyond 1e-6");
      return false;
    }
  }
  // branch switches: both branches disabled reproduce the self-attention-only
  // path exactly, and full decoding has unit Frobenius norm
  {
    const auto t_fm = random_fm(4, 3, 3, 13);
    const auto s_fm = random_fm(4, 3, 3, 14);
    const auto cfg = TransformerConfig<double>::orthonormal_init(4, 77);
    const auto enc = encode(single(t_fm), cfg);
    const Vector<double> m = Vector<double>::Ones(9);
    const auto off = decode(s_fm, enc, m, cfg, {false, false});
    if ((off.embeddings - decode_self(s_fm, cfg)).cwiseAbs().maxCoeff() !=
        0.0) {
      note("branch-disabled decode differs from self-attention path");
      return false;
    }
    const auto full = decode(s_fm, enc, m, cfg, {true, true});
    if (std::abs(full.embeddings.norm() - 1.0) > 1e-9) {
      note("full decode not unit Frobenius norm");
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// 3. DCF oracle equivalence on 20 random instances.
// ---------------------------------------------------------------------------
struct RidgeProblem {
  Matrix<double> gram;
  Vector<double> rhs;
  double lambda;
  Vector<double> gradient(const Vector<double>& f) const {
    return 2.0 * (gram * f - rhs) + 2.0 * lambda * f;
  }
};

RidgeProblem assemble(const EncodedTemplates<double>& enc,
                      const std::vector<GaussianLabel<double>>& labels,
                      double lambda, int kh, int kw) {
  const int oh = enc.height - kh + 1, ow = enc.width - kw + 1;
  const int r0 = (kh - 1) / 2, c0 = (kw - 1) / 2;
  const Eigen::Index dim = static_cast<Eigen::Index>(enc.channels) * kh * kw;
  RidgeProblem p{Matrix<double>::Zero(dim, dim), Vector<double>::Zero(dim),
                 lambda};
  for (int i = 0; i < enc.count; ++i) {
    const auto t = enc.block(i);
    Matrix<double> x(static_cast<Eigen::Index>(oh) * ow, dim);
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        Eigen::Index col = 0;
        for (int ch = 0; ch < enc.channels; ++ch)
          for (int y = 0; y < kh; ++y)
            for (int xx = 0; xx < kw; ++xx)
              x(static_cast<Eigen::Index>(r) * ow + c, col++) =
                  t.at(ch, r + y, c + xx);
      }
    Vector<double> y(static_cast<Eigen::Index>(oh) * ow);
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c)
        y[static_cast<Eigen::Index>(r) * ow + c] =
            labels[i].data[static_cast<Eigen::Index>(r + r0) * enc.width + c +
                           c0];
    p.gram += x.transpose() * x;
    p.rhs += x.transpose() * y;
  }
  return p;
}

bool dcf_oracle() {
  CounterRng rng(0xdcf);
  for (int inst = 0; inst < 20; ++inst) {
    const int C = 1 + inst % 4;
    const int k = (inst % 2 == 0) ? 3 : 1;
    const int grid = 8 + (inst % 3) * 4;  // 8, 12, 16
    const int count = 1 + inst % 2;
    std::vector<FeatureMap<double>> fms;
    for (int i = 0; i < count; ++i)
      fms.push_back(random_fm(C, grid, grid, 1000 + 10 * inst + i));
    const EncodedTemplates<double> enc{concat_embeddings(fms), count, C, grid,
                                       grid};
    std::vector<GaussianLabel<double>> labels;
    for (int i = 0; i < count; ++i)
      labels.push_back(gaussian_label<double>(
          grid, grid,
          {0.3 + 0.4 * rng.uniform(2 * inst), 0.3 + 0.4 * rng.uniform(2 * inst + 1)},
          0.15));
    const double lambda = (inst % 3 == 0) ? 1e-1 : 1e-2;
    const auto kern = solve_dcf(enc, labels, lambda, k, k);
    const auto problem = assemble(enc, labels, lambda, k, k);
    // gradient descent with the exact Lipschitz step size
    Eigen::SelfAdjointEigenSolver<Matrix<double>> es(problem.gram);
    const double step = 1.0 / (2.0 * (es.eigenvalues().maxCoeff() + lambda));
    Vector<double> f = Vector<double>::Zero(problem.gram.rows());
    for (int i = 0; i < 20000; ++i) f -= step * problem.gradient(f);
    if ((kern.data - f).norm() > 1e-4 * (1.0 + f.norm())) {
      note("oracle mismatch at instance " + std::to_string(inst));
      return false;
    }
    if (problem.gradient(kern.data).norm() >
        1e-8 * (1.0 + kern.data.norm())) {
      note("stationarity residual too large at instance " +
           std::to_string(inst));
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// 4. Clean-scene tracking across the full config grid.
// ---------------------------------------------------------------------------
SceneSpec clean_scene() {
  SceneSpec s;
  s.seed = 11;
  s.frames = 100;
  s.height = 10;
  s.width = 10;
  s.channels = 8;
  s.target_radius = 1;
  s.motion.model = MotionModel::Sinusoidal;
  s.motion.start_row = 5;
  s.motion.start_col = 5;
  s.motion.amp_row = 2.5;
  s.motion.amp_col = 3.0;
  s.motion.period = 25;
  return s;
}

bool clean_scene_tracking() {
  const auto spec = clean_scene();
  const auto frames = generate(spec);
  for (Pipeline p : {Pipeline::Siamese, Pipeline::Dcf})
    for (TransformerMode m :
         {TransformerMode::Off, TransformerMode::EncoderOnly,
          TransformerMode::MaskOnly, TransformerMode::FeatureOnly,
          TransformerMode::Full}) {
      TrackerConfig cfg;
      cfg.pipeline = p;
      cfg.mode = m;
      const auto res = track(frames, spec.target_radius, cfg);
      if (res.ao <= 0.99) {
        note(std::string("AO ") + std::to_string(res.ao) + " for " +
             to_string(p) + "/" + to_string(m));
        return false;
      }
    }
  return true;
}

// ---------------------------------------------------------------------------
// 5. Transformer benefit on the pinned 20-scene suite.
// ---------------------------------------------------------------------------
// Mean AO per (pipeline, mode) from the first verified run of the committed
// suite; regression tolerance ±0.02.
constexpr double kPinnedAo[10] = {
    0.47836063238854865,  // siamese off
    0.47715300526990456,  // siamese encoder
    0.62939912405640219,  // siamese mask
    0.54732855006409342,  // siamese feature
    0.62111825238569995,  // siamese full
    0.64624376869391820,  // dcf off
    0.59877367896311051,  // dcf encoder
    0.74467615012106547,  // dcf mask
    0.75003329297820842,  // dcf feature
    0.75948832075202977,  // dcf full
};

bool transformer_benefit() {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(TCT_SUITE_DIR))
    if (entry.path().extension() == ".scene") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.size() != 20) {
    note("expected 20 scenes, found " + std::to_string(files.size()));
    return false;
  }
  std::vector<SceneSpec> suite;
  for (const auto& f : files) suite.push_back(parse_scene_file(f.string()));

  std::vector<TrackerConfig> modes;
  for (Pipeline p : {Pipeline::Siamese, Pipeline::Dcf})
    for (TransformerMode m :
         {TransformerMode::Off, TransformerMode::EncoderOnly,
          TransformerMode::MaskOnly, TransformerMode::FeatureOnly,
          TransformerMode::Full}) {
      TrackerConfig cfg;
      cfg.pipeline = p;
      cfg.mode = m;
      modes.push_back(cfg);
    }
  const auto rows = run_ablation(suite, modes);

  bool ok = true;
  auto ao = [&](int i) { return rows[static_cast<std::size_t>(i)].ao; };
  // margins: full over off, and each single branch over off, per pipeline
  const struct {
    int off, mask, feature, full;
    double full_margin;
    const char* name;
  } req[2] = {{0, 2, 3, 4, 0.05, "siamese"}, {5, 7, 8, 9, 0.02, "dcf"}};
  for (const auto& r : req) {
    if (ao(r.full) < ao(r.off) + r.full_margin) {
      note(std::string(r.name) + ": full " + std::to_string(ao(r.full)) +
           " vs off " + std::to_string(ao(r.off)));
      ok = false;
    }
    if (ao(r.mask) <= ao(r.off)) {
      note(std::string(r.name) + ": mask-only does not beat off");
      ok = false;
    }
    if (ao(r.feature) <= ao(r.off)) {
      note(std::string(r.name) + ": feature-only does not beat off");
      ok = false;
    }
  }
  for (int i = 0; i < 10; ++i)
    if (std::abs(ao(i) - kPinnedAo[i]) > 0.02) {
      note("row " + std::to_string(i) + " drifted from pinned AO: " +
           std::to_string(ao(i)) + " vs " + std::to_string(kPinnedAo[i]));
      ok = false;
    }
  return ok;
}

// ---------------------------------------------------------------------------
// 6. Ensemble protocol over a 101-frame run.
// ---------------------------------------------------------------------------
bool ensemble_protocol() {
  auto spec = clean_scene();
  spec.frames = 101;
  const auto frames = generate(spec);
  TrackerConfig cfg;
  cfg.mode = TransformerMode::Full;
  cfg.interval = 5;
  cfg.max_size = 20;
  const auto res = track(frames, spec.target_radius, cfg);
  // updates at frames 5, 10, ..., 100: 20 refreshes after the initial encode
  if (res.encoder_invocations != 21) {
    note("encoder invocations " + std::to_string(res.encoder_invocations) +
         ", expected 21");
    return false;
  }
  // 1 initial + 20 updates = 21 inserts, capped at 20 stored templates
  if (res.templates_stored != 20) {
    note("templates stored " + std::to_string(res.templates_stored) +
         ", expected 20");
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// 7. End-to-end CLI determinism.
// ---------------------------------------------------------------------------
std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool cli_determinism() {
  const fs::path work = fs::temp_directory_path() / "tct_acceptance_cli";
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path scene = work / "scene.scene";
  {
    std::ofstream f(scene);
    f << "seed = 5\nframes = 20\nheight = 10\nwidth = 10\nchannels = 16\n"
         "target_radius = 1\nnoise_sigma = 0.3\ndrift_rate = 0.02\n"
         "motion.model = sinusoidal\nmotion.start_row = 5\n"
         "motion.start_col = 5\nmotion.amp_row = 2\nmotion.amp_col = 2.5\n"
         "motion.period = 15\ndistractors = 1\ndistractor0.rho = 0.85\n"
         "distractor0.model = linear\ndistractor0.start_row = 2\n"
         "distractor0.start_col = 2\ndistractor0.vel_row = 0.1\n"
         "distractor0.vel_col = 0.1\n";
  }
  auto run = [&](const fs::path& out) {
    const std::string cmd = std::string("\"") + TCT_CLI_PATH +
                            "\" track --scene \"" + scene.string() +
                            "\" --mode full --pipeline siamese --out \"" +
                            out.string() + "\" --export responses > " +
                            (out.string() + ".log") + " 2>&1";
    if (std::system(cmd.c_str()) != 0) return false;
    const std::string exp = std::string("\"") + TCT_CLI_PATH +
                            "\" export-response --run \"" + out.string() +
                            "\" >> " + (out.string() + ".log") + " 2>&1";
    return std::system(exp.c_str()) == 0;
  };
  const fs::path a = work / "a", b = work / "b";
  if (!run(a) || !run(b)) {
    note("CLI invocation failed; see logs under " + work.string());
    return false;
  }
  if (read_bytes(a / "result.csv") != read_bytes(b / "result.csv")) {
    note("result.csv differs between runs");
    return false;
  }
  std::vector<fs::path> pgms;
  for (const auto& entry : fs::directory_iterator(a / "responses"))
    if (entry.path().extension() == ".pgm") pgms.push_back(entry.path());
  std::sort(pgms.begin(), pgms.end());
  if (pgms.empty()) {
    note("no graymaps exported");
    return false;
  }
  for (const auto& p : pgms) {
    const fs::path other = b / "responses" / p.filename();
    if (!fs::exists(other) || read_bytes(p) != read_bytes(other)) {
      note("graymap differs: " + p.filename().string());
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// 8. Coverage: the docs table maps every core operation to a real test.
// ---------------------------------------------------------------------------
bool coverage_table() {
  const fs::path doc = fs::path(TCT_DOCS_DIR) / "coverage.md";
  if (!fs::exists(doc)) {
    note("docs/coverage.md missing");
    return false;
  }
  const std::string text = read_bytes(doc);
  std::string tests;
  for (const auto& entry : fs::directory_iterator(TCT_TESTS_DIR))
    if (entry.path().extension() == ".cpp") tests += read_bytes(entry.path());

  // one table row per core operation, each naming a test that exists
  std::istringstream lines(text);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    const auto open = line.find('`');
    if (line.rfind("| ", 0) != 0 || open == std::string::npos) continue;
    const auto close = line.find('`', open + 1);
    if (close == std::string::npos) continue;
    const std::string test_id = line.substr(open + 1, close - open - 1);
    if (tests.find(test_id) == std::string::npos) {
      note("test identifier not found in sources: " + test_id);
      return false;
    }
    ++rows;
  }
  if (rows < 8) {
    note("expected at least 8 coverage rows, found " + std::to_string(rows));
    return false;
  }
  return true;
}

}  // namespace

int main() {
  criterion(1, "attention algebra (1000 randomized cases)", attention_algebra);
  criterion(2, "transformer fixed points", transformer_fixed_points);
  criterion(3, "ridge solve matches gradient-descent oracle",
            dcf_oracle);
  criterion(4, "clean-scene tracking across the config grid",
            clean_scene_tracking);
  criterion(5, "transformer benefit on the pinned scene suite",
            transformer_benefit);
  criterion(6, "template ensemble protocol (101 frames)", ensemble_protocol);
  criterion(7, "CLI determinism (byte-identical artifacts)", cli_determinism);
  criterion(8, "operation coverage table", coverage_table);
  if (g_failures) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
