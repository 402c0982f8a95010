// facepipe: morphable-face fitting, standardized expressive synthesis, and
// audio-visual sync evaluation over feature streams.

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "facepipe/collections.hpp"
#include "facepipe/config.hpp"
#include "facepipe/fitter.hpp"
#include "facepipe/landmarks.hpp"
#include "facepipe/render.hpp"
#include "facepipe/rng.hpp"
#include "facepipe/standardize.hpp"
#include "facepipe/synceval.hpp"

namespace fp = facepipe;
namespace fs = std::filesystem;

namespace {

// Every tunable reachable from the config file; flags override.
struct PipelineConfig {
  fp::Camera camera;
  fp::LossWeights weights;
  fp::FitConfig fit;
  fp::SceneConfig scene;
  fp::BasisDims dims;
  int basis_vertices = 2000;
  int sync_window = 15;
  int sync_smoothing = 15;
  int sync_tolerance = 1;
};

const std::vector<std::string> kKnownKeys = {
    "camera.focal",        "camera.width",          "camera.height",
    "camera.cx",           "camera.cy",             "weights.lambda_pho",
    "weights.lambda_lan",  "weights.lambda_reg",    "weights.omega_alpha",
    "weights.omega_beta",  "weights.omega_delta",   "weights.lip_weight",
    "fit.outer_iterations", "fit.gn_iterations",    "fit.damping",
    "fit.tolerance",       "scene.sigma_id",        "scene.sigma_tex",
    "scene.sigma_exp",     "scene.euler_range",     "scene.shift_range",
    "scene.depth_range",   "scene.light_dc_range",  "scene.light_band_range",
    "scene.landmark_noise", "sync.window",          "sync.smoothing",
    "sync.tolerance",      "basis.vertices",        "basis.dim_id",
    "basis.dim_exp",       "basis.dim_tex",
};

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad numeric value '" + v + "' for key '" + key + "'");
  }
}

int to_int(const std::string& v, const std::string& key) {
  double x = to_double(v, key);
  return static_cast<int>(x);
}

PipelineConfig load_pipeline_config(const std::string& path) {
  PipelineConfig cfg;
  if (path.empty()) return cfg;
  auto kv = fp::parse_config_file(path);
  fp::validate_config_keys(kv, kKnownKeys);
  auto num = [&](const char* key, double& target) {
    if (auto it = kv.find(key); it != kv.end()) target = to_double(it->second, key);
  };
  auto integer = [&](const char* key, int& target) {
    if (auto it = kv.find(key); it != kv.end()) target = to_int(it->second, key);
  };
  num("camera.focal", cfg.camera.focal);
  integer("camera.width", cfg.camera.width);
  integer("camera.height", cfg.camera.height);
  num("camera.cx", cfg.camera.principal.x());
  num("camera.cy", cfg.camera.principal.y());
  num("weights.lambda_pho", cfg.weights.lambda_pho);
  num("weights.lambda_lan", cfg.weights.lambda_lan);
  num("weights.lambda_reg", cfg.weights.lambda_reg);
  num("weights.omega_alpha", cfg.weights.omega_alpha);
  num("weights.omega_beta", cfg.weights.omega_beta);
  num("weights.omega_delta", cfg.weights.omega_delta);
  num("weights.lip_weight", cfg.weights.lip_weight);
  integer("fit.outer_iterations", cfg.fit.outer_iterations);
  integer("fit.gn_iterations", cfg.fit.landmark_gn_iterations);
  num("fit.damping", cfg.fit.damping_init);
  num("fit.tolerance", cfg.fit.convergence_tol);
  num("scene.sigma_id", cfg.scene.sigma_id);
  num("scene.sigma_tex", cfg.scene.sigma_tex);
  num("scene.sigma_exp", cfg.scene.sigma_exp);
  num("scene.euler_range", cfg.scene.euler_range);
  num("scene.shift_range", cfg.scene.shift_range);
  num("scene.depth_range", cfg.scene.depth_range);
  num("scene.light_dc_range", cfg.scene.light_dc_range);
  num("scene.light_band_range", cfg.scene.light_band_range);
  num("scene.landmark_noise", cfg.scene.landmark_noise);
  integer("sync.window", cfg.sync_window);
  integer("sync.smoothing", cfg.sync_smoothing);
  integer("sync.tolerance", cfg.sync_tolerance);
  integer("basis.vertices", cfg.basis_vertices);
  integer("basis.dim_id", cfg.dims.id);
  integer("basis.dim_exp", cfg.dims.exp);
  integer("basis.dim_tex", cfg.dims.tex);
  cfg.fit.weights = cfg.weights;
  return cfg;
}

std::vector<std::pair<std::string, std::string>> base_manifest(const std::string& command,
                                                               std::uint64_t seed,
                                                               const PipelineConfig& cfg) {
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  return {
      {"tool", "facepipe"},
      {"version", fp::kToolVersion},
      {"command", command},
      {"seed", std::to_string(seed)},
      {"camera.focal", fmt(cfg.camera.focal)},
      {"camera.width", std::to_string(cfg.camera.width)},
      {"camera.height", std::to_string(cfg.camera.height)},
      {"camera.cx", fmt(cfg.camera.principal.x())},
      {"camera.cy", fmt(cfg.camera.principal.y())},
      {"weights.lambda_pho", fmt(cfg.weights.lambda_pho)},
      {"weights.lambda_lan", fmt(cfg.weights.lambda_lan)},
      {"weights.lambda_reg", fmt(cfg.weights.lambda_reg)},
      {"weights.omega_alpha", fmt(cfg.weights.omega_alpha)},
      {"weights.omega_beta", fmt(cfg.weights.omega_beta)},
      {"weights.omega_delta", fmt(cfg.weights.omega_delta)},
      {"weights.lip_weight", fmt(cfg.weights.lip_weight)},
      {"fit.outer_iterations", std::to_string(cfg.fit.outer_iterations)},
      {"fit.gn_iterations", std::to_string(cfg.fit.landmark_gn_iterations)},
      {"fit.damping", fmt(cfg.fit.damping_init)},
      {"fit.tolerance", fmt(cfg.fit.convergence_tol)},
      {"sync.window", std::to_string(cfg.sync_window)},
      {"sync.smoothing", std::to_string(cfg.sync_smoothing)},
      {"sync.tolerance", std::to_string(cfg.sync_tolerance)},
  };
}

void write_shared_coefficients(const fp::CollectionEstimate& est, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  char buf[64];
  auto line = [&](const char* name, const Eigen::VectorXd& v) {
    out << name << " =";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), " %.17g", v[i]);
      out << buf;
    }
    out << "\n";
  };
  line("alpha", est.alpha);
  line("delta", est.delta);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

fp::AttributeSelector parse_selector(const std::string& spec) {
  fp::AttributeSelector sel;
  std::string token;
  std::istringstream in(spec);
  while (std::getline(in, token, ',')) {
    if (token == "alpha")
      sel.alpha = true;
    else if (token == "beta")
      sel.beta = true;
    else if (token == "delta")
      sel.delta = true;
    else if (token == "gamma")
      sel.gamma = true;
    else if (token == "pose")
      sel.pose = true;
    else if (!token.empty())
      throw std::runtime_error("unknown attribute '" + token + "' in selector");
  }
  return sel;
}

// --- subcommand bodies -------------------------------------------------------

int cmd_gen_basis(const PipelineConfig& cfg, std::uint64_t seed, const std::string& out,
                  int vertices, const std::string& dims_flag) {
  fp::BasisDims dims = cfg.dims;
  if (!dims_flag.empty()) {
    if (std::sscanf(dims_flag.c_str(), "%d,%d,%d", &dims.id, &dims.exp, &dims.tex) != 3)
      throw std::runtime_error("--dims expects 'D_id,D_exp,D_tex'");
  }
  const fp::MorphableBasis basis = fp::generate_synthetic_basis(seed, vertices, dims);
  fp::save_basis(basis, out);
  auto manifest = base_manifest("gen-basis", seed, cfg);
  manifest.emplace_back("vertices", std::to_string(vertices));
  manifest.emplace_back("output.basis", fp::digest_file(out));
  fp::write_manifest(fs::path(out).string() + ".manifest.txt", manifest);
  std::cout << "wrote " << out << " (V=" << basis.vertex_count() << ")\n";
  return 0;
}

int cmd_gen_scene(const PipelineConfig& cfg, std::uint64_t seed, const std::string& basis_path,
                  const std::string& out, int collections, int frames) {
  const fp::MorphableBasis basis = fp::load_basis(basis_path);
  fs::create_directories(out);
  for (int k = 0; k < collections; ++k) {
    char id[32];
    std::snprintf(id, sizeof(id), "subject%02d", k);
    fp::generate_synthetic_scene(basis, fp::Rng::substream(seed, std::string("collection") + id),
                                 frames, cfg.camera, cfg.scene, out, id);
  }
  auto manifest = base_manifest("gen-scene", seed, cfg);
  manifest.emplace_back("input.basis", fp::digest_file(basis_path));
  manifest.emplace_back("collections", std::to_string(collections));
  manifest.emplace_back("frames", std::to_string(frames));
  manifest.emplace_back("output.tree", fp::digest_tree(out));
  fp::write_manifest(fs::path(out) / "manifest.txt", manifest);
  std::cout << "wrote " << collections << " collections of " << frames << " frames under " << out
            << "\n";
  return 0;
}

int cmd_synth(const PipelineConfig& cfg, const std::string& basis_path,
              const std::string& coeffs_path, const std::string& out_prefix) {
  const fp::MorphableBasis basis = fp::load_basis(basis_path);
  const fp::StandardizationDefaults defaults = fp::make_defaults(basis, cfg.camera);
  const fp::CoefficientFile file = fp::read_coefficient_file(coeffs_path);
  const fp::CoefficientSet coeffs =
      fp::to_coefficient_set(file, basis, defaults.gamma0, defaults.pose0);
  const fp::RenderedImage img = fp::render(basis, coeffs, cfg.camera);
  const fp::GrayRender depth = fp::render_pseudo_depth(basis, coeffs, cfg.camera);
  fp::write_ppm(img.rgb, out_prefix + ".ppm");
  fp::write_pgm16(depth.value, out_prefix + "_depth.pgm");
  auto manifest = base_manifest("synth", 0, cfg);
  manifest.emplace_back("input.basis", fp::digest_file(basis_path));
  manifest.emplace_back("input.coeffs", fp::digest_file(coeffs_path));
  manifest.emplace_back("output.rgb", fp::digest_file(out_prefix + ".ppm"));
  manifest.emplace_back("output.depth", fp::digest_file(out_prefix + "_depth.pgm"));
  fp::write_manifest(out_prefix + ".manifest.txt", manifest);
  std::cout << "wrote " << out_prefix << ".ppm and " << out_prefix << "_depth.pgm\n";
  return 0;
}

int cmd_fit(const PipelineConfig& cfg, const std::string& basis_path, const std::string& data,
            const std::string& out, bool per_image, int threads) {
  const fp::MorphableBasis basis = fp::load_basis(basis_path);
  const fp::ScanResult scan = fp::scan_dataset(data);
  if (!scan.report.clean())
    std::cerr << "warning: dataset has orphans\n" << scan.report.to_text();
  fs::create_directories(out);

  const int n = static_cast<int>(scan.dataset.collections.size());
  std::vector<fp::FitResult> results(static_cast<size_t>(n));
  std::vector<fp::PerImageFitResult> per_image_results(static_cast<size_t>(n));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      if (failed.load()) return;
      try {
        const fp::LoadedCollection loaded =
            fp::load_collection(scan.dataset.collections[static_cast<size_t>(i)]);
        if (per_image)
          per_image_results[static_cast<size_t>(i)] =
              fp::fit_per_image(basis, loaded, cfg.camera, cfg.fit);
        else
          results[static_cast<size_t>(i)] = fp::fit_collection(basis, loaded, cfg.camera, cfg.fit);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        error_message = std::string("collection '") +
                        scan.dataset.collections[static_cast<size_t>(i)].id + "': " + e.what();
        failed.store(true);
        return;
      }
    }
  };
  const int n_threads = std::max(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load()) throw std::runtime_error(error_message);

  for (int i = 0; i < n; ++i) {
    const fp::Collection& col = scan.dataset.collections[static_cast<size_t>(i)];
    const fs::path col_dir = fs::path(out) / col.id;
    fs::create_directories(col_dir);
    if (per_image) {
      const auto& pr = per_image_results[static_cast<size_t>(i)];
      for (size_t f = 0; f < col.items.size(); ++f) {
        fp::write_coefficients(pr.estimates[f], col_dir / (col.items[f].frame_id + ".coeffs"));
        fp::write_loss_trace(pr.traces[f],
                             col_dir / (col.items[f].frame_id + ".trace.csv"));
      }
    } else {
      const fp::FitResult& r = results[static_cast<size_t>(i)];
      write_shared_coefficients(r.estimate, col_dir / "shared.coeffs");
      for (size_t f = 0; f < col.items.size(); ++f)
        fp::write_coefficients(r.estimate.coefficients(f),
                               col_dir / (col.items[f].frame_id + ".coeffs"));
      fp::write_loss_trace(r.loss_trace, col_dir / "trace.csv");
    }
  }

  auto manifest = base_manifest("fit", 0, cfg);
  manifest.emplace_back("input.basis", fp::digest_file(basis_path));
  manifest.emplace_back("input.data", fp::digest_tree(data));
  manifest.emplace_back("mode", per_image ? "per-image" : "collection");
  manifest.emplace_back("output.tree", fp::digest_tree(out));
  fp::write_manifest(fs::path(out) / "manifest.txt", manifest);
  std::cout << "fitted " << n << " collections into " << out << "\n";
  return 0;
}

int cmd_standardize(const PipelineConfig& cfg, const std::string& basis_path,
                    const std::string& fit_dir, const std::string& coeffs_path,
                    const std::string& out) {
  const fp::MorphableBasis basis = fp::load_basis(basis_path);
  const fp::StandardizationDefaults defaults = fp::make_defaults(basis, cfg.camera);
  fs::create_directories(out);

  if (!coeffs_path.empty()) {
    const fp::CoefficientFile file = fp::read_coefficient_file(coeffs_path);
    const fp::CoefficientSet coeffs =
        fp::to_coefficient_set(file, basis, defaults.gamma0, defaults.pose0);
    const fp::StandardizedFrame frame = fp::standardize_image(basis, coeffs.beta, defaults);
    fp::write_standardized_frames({frame}, out);
  } else {
    std::vector<fs::path> col_dirs;
    for (const auto& entry : fs::directory_iterator(fit_dir))
      if (entry.is_directory()) col_dirs.push_back(entry.path());
    std::sort(col_dirs.begin(), col_dirs.end());
    if (col_dirs.empty()) throw std::runtime_error("standardize: no collections in " + fit_dir);
    for (const auto& dir : col_dirs) {
      std::vector<fs::path> coeff_files;
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".coeffs" && entry.path().filename() != "shared.coeffs")
          coeff_files.push_back(entry.path());
      std::sort(coeff_files.begin(), coeff_files.end());
      std::vector<fp::StandardizedFrame> frames;
      for (const auto& cf : coeff_files) {
        const fp::CoefficientFile file = fp::read_coefficient_file(cf);
        const fp::CoefficientSet coeffs =
            fp::to_coefficient_set(file, basis, defaults.gamma0, defaults.pose0);
        frames.push_back(fp::standardize_image(basis, coeffs.beta, defaults));
      }
      fp::write_standardized_frames(frames, fs::path(out) / dir.filename());
    }
  }

  auto manifest = base_manifest("standardize", 0, cfg);
  manifest.emplace_back("input.basis", fp::digest_file(basis_path));
  if (!coeffs_path.empty())
    manifest.emplace_back("input.coeffs", fp::digest_file(coeffs_path));
  else
    manifest.emplace_back("input.fit", fp::digest_tree(fit_dir));
  manifest.emplace_back("output.tree", fp::digest_tree(out));
  fp::write_manifest(fs::path(out) / "manifest.txt", manifest);
  std::cout << "standardized frames written under " << out << "\n";
  return 0;
}

int cmd_eval_lmd(const PipelineConfig& cfg, const std::string& basis_path,
                 const std::string& data, const std::string& fit_dir,
                 const std::string& selector_spec, int groups, bool weighted,
                 const std::string& out) {
  const fp::MorphableBasis basis = fp::load_basis(basis_path);
  const fp::AttributeSelector sel = parse_selector(selector_spec);
  const fp::ScanResult scan = fp::scan_dataset(data);
  const fp::StandardizationDefaults defaults = fp::make_defaults(basis, cfg.camera);
  const int n_lmk = static_cast<int>(basis.landmark_indices.size());
  const fp::LandmarkWeights metric_w =
      weighted ? fp::standard_weights(n_lmk, cfg.weights.lip_weight) : fp::lip_only_weights(n_lmk);

  std::vector<std::vector<double>> collection_lmds;  // per collection: per-datum
  for (const auto& col : scan.dataset.collections) {
    std::vector<double> datum;
    for (const auto& item : col.items) {
      const fs::path gt_path = fs::path(data) / col.id / "gt" / (item.frame_id + ".coeffs");
      const fs::path est_path = fs::path(fit_dir) / col.id / (item.frame_id + ".coeffs");
      const fp::CoefficientSet gt = fp::to_coefficient_set(
          fp::read_coefficient_file(gt_path), basis, defaults.gamma0, defaults.pose0);
      const fp::CoefficientSet est = fp::to_coefficient_set(
          fp::read_coefficient_file(est_path), basis, defaults.gamma0, defaults.pose0);
      const fp::CoefficientSet mixed = fp::form_mixed_coefficients(gt, est, sel);
      const fp::LandmarkSet ref = fp::reproject_landmarks(basis, gt, cfg.camera);
      const fp::LandmarkSet mix = fp::reproject_landmarks(basis, mixed, cfg.camera);
      datum.push_back(fp::lmd(ref, mix, metric_w));
    }
    collection_lmds.push_back(std::move(datum));
  }

  // Round-robin assignment of collections to groups, as a stand-in for
  // cross-validation folds.
  groups = std::max(1, std::min(groups, static_cast<int>(collection_lmds.size())));
  std::vector<std::vector<std::vector<double>>> grouped(static_cast<size_t>(groups));
  for (size_t i = 0; i < collection_lmds.size(); ++i)
    grouped[i % static_cast<size_t>(groups)].push_back(collection_lmds[i]);
  const fp::GroupLmdStats stats = fp::group_lmd_stats(grouped);

  fs::create_directories(out);
  std::ofstream report(fs::path(out) / "lmd.txt");
  char buf[96];
  auto emit = [&](const std::string& k, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.17g\n", k.c_str(), v);
    report << buf;
    std::cout << k << " = " << v << "\n";
  };
  for (size_t i = 0; i < collection_lmds.size(); ++i)
    emit("collection." + scan.dataset.collections[i].id,
         fp::collection_lmd(collection_lmds[i]));
  for (size_t g = 0; g < stats.per_group.size(); ++g)
    emit("group." + std::to_string(g), stats.per_group[g]);
  emit("group_lmd.min", stats.min);
  emit("group_lmd.max", stats.max);
  emit("group_lmd.avg", stats.avg);
  if (!report) throw std::runtime_error("report write failed");
  report.close();

  auto manifest = base_manifest("eval-lmd", 0, cfg);
  manifest.emplace_back("input.basis", fp::digest_file(basis_path));
  manifest.emplace_back("input.data", fp::digest_tree(data));
  manifest.emplace_back("input.fit", fp::digest_tree(fit_dir));
  manifest.emplace_back("selector", selector_spec);
  manifest.emplace_back("metric", weighted ? "weighted-all" : "lip-only");
  manifest.emplace_back("output.report", fp::digest_file(fs::path(out) / "lmd.txt"));
  fp::write_manifest(fs::path(out) / "manifest.txt", manifest);
  return 0;
}

int cmd_eval_sync(const PipelineConfig& cfg, const std::string& visual_path,
                  const std::string& audio_path, int gt_offset, bool have_gt,
                  const std::string& pairs_path, const std::string& tracks_path,
                  const std::string& out) {
  fs::create_directories(out);
  auto manifest = base_manifest("eval-sync", 0, cfg);
  char buf[96];

  if (!tracks_path.empty()) {
    std::ifstream in(tracks_path);
    if (!in) throw std::runtime_error("cannot open: " + tracks_path);
    std::vector<fp::ScoredTrack> tracks;
    std::string v, a, label;
    int zero_norms = 0;
    while (in >> v >> a >> label) {
      fp::ScoredTrack track;
      if (label == "active")
        track.active = true;
      else if (label == "inactive")
        track.active = false;
      else
        throw std::runtime_error("tracks file: label must be active|inactive, got '" + label +
                                 "'");
      const fp::AsdScores scores = fp::asd_scores(
          fp::read_feature_stream(v), fp::read_feature_stream(a), cfg.sync_smoothing);
      zero_norms += scores.zero_norm_count;
      track.scores = scores.scores;
      tracks.push_back(std::move(track));
    }
    const fp::ClassificationMetrics metrics = fp::classification_metrics(tracks);
    std::ofstream report(fs::path(out) / "metrics.txt");
    auto emit = [&](const char* k, double val) {
      std::snprintf(buf, sizeof(buf), "%s = %.17g\n", k, val);
      report << buf;
      std::cout << k << " = " << val << "\n";
    };
    emit("ap", metrics.ap);
    emit("auroc", metrics.auroc);
    emit("eer", metrics.eer);
    report << "tracks = " << tracks.size() << "\n";
    report << "zero_norm_frames = " << zero_norms << "\n";
    report.close();

    auto write_curve = [&](const char* name, const std::vector<fp::CurvePoint>& curve,
                           const char* header) {
      std::ofstream csv(fs::path(out) / name);
      csv << header << "\n";
      for (const auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.x, p.y);
        csv << buf;
      }
    };
    write_curve("roc.csv", fp::roc_curve(tracks), "fpr,tpr");
    write_curve("pr.csv", fp::pr_curve(tracks), "recall,precision");
    manifest.emplace_back("input.tracks", fp::digest_file(tracks_path));
  } else if (!pairs_path.empty()) {
    std::ifstream in(pairs_path);
    if (!in) throw std::runtime_error("cannot open: " + pairs_path);
    std::vector<int> predicted, expected;
    std::string v, a;
    int gt;
    std::ofstream report(fs::path(out) / "offsets.txt");
    while (in >> v >> a >> gt) {
      const fp::OffsetResult r = fp::determine_offset(fp::read_feature_stream(v),
                                                      fp::read_feature_stream(a), cfg.sync_window);
      predicted.push_back(r.offset);
      expected.push_back(gt);
      report << v << " offset = " << r.offset << " gt = " << gt
             << (r.boundary_hit ? " boundary" : "") << "\n";
    }
    const double acc = fp::offset_accuracy(predicted, expected, cfg.sync_tolerance);
    std::snprintf(buf, sizeof(buf), "accuracy = %.17g\n", acc);
    report << buf;
    std::cout << buf;
    report.close();
    manifest.emplace_back("input.pairs", fp::digest_file(pairs_path));
  } else {
    const fp::OffsetResult r = fp::determine_offset(fp::read_feature_stream(visual_path),
                                                    fp::read_feature_stream(audio_path),
                                                    cfg.sync_window);
    std::ofstream report(fs::path(out) / "offset.txt");
    report << "offset = " << r.offset << "\n";
    report << "boundary_hit = " << (r.boundary_hit ? 1 : 0) << "\n";
    if (have_gt) {
      report << "gt_offset = " << gt_offset << "\n";
      report << "correct = " << (std::abs(r.offset - gt_offset) <= cfg.sync_tolerance ? 1 : 0)
             << "\n";
    }
    report.close();
    std::ofstream profile(fs::path(out) / "profile.csv");
    profile << "offset,similarity,pairs\n";
    for (int o = -cfg.sync_window; o <= cfg.sync_window; ++o) {
      const size_t i = static_cast<size_t>(o + cfg.sync_window);
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%d\n", o, r.profile[i], r.pair_counts[i]);
      profile << buf;
    }
    std::cout << "offset = " << r.offset << "\n";
    manifest.emplace_back("input.visual", fp::digest_file(visual_path));
    manifest.emplace_back("input.audio", fp::digest_file(audio_path));
  }
  manifest.emplace_back("output.tree", fp::digest_tree(out));
  fp::write_manifest(fs::path(out) / "manifest.txt", manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morphable-face fitting, standardized synthesis, and AV sync evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  app.add_option("--config", config_path, "pipeline config file (key = value with sections)");
  app.add_option("--seed", seed, "top-level random seed");
  app.add_option("--threads", threads, "worker threads for fit");

  // gen-basis
  auto* gen_basis = app.add_subcommand("gen-basis", "generate a synthetic morphable basis");
  std::string gb_out;
  int gb_vertices = 2000;
  std::string gb_dims;
  gen_basis->add_option("--out", gb_out, "output .mbf path")->required();
  gen_basis->add_option("--vertices", gb_vertices, "target vertex count");
  gen_basis->add_option("--dims", gb_dims, "D_id,D_exp,D_tex (default 80,64,80)");

  // gen-scene
  auto* gen_scene = app.add_subcommand("gen-scene", "render a synthetic dataset with ground truth");
  std::string gs_basis, gs_out;
  int gs_collections = 4, gs_frames = 6;
  gen_scene->add_option("--basis", gs_basis)->required();
  gen_scene->add_option("--out", gs_out)->required();
  gen_scene->add_option("--collections", gs_collections);
  gen_scene->add_option("--frames", gs_frames);

  // synth
  auto* synth = app.add_subcommand("synth", "render a coefficient file to RGB + pseudo-depth");
  std::string sy_basis, sy_coeffs, sy_out;
  synth->add_option("--basis", sy_basis)->required();
  synth->add_option("--coeffs", sy_coeffs)->required();
  synth->add_option("--out", sy_out, "output prefix")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "fit collections (shared identity/texture)");
  std::string ft_basis, ft_data, ft_out;
  bool ft_per_image = false;
  fit->add_option("--basis", ft_basis)->required();
  fit->add_option("--data", ft_data)->required();
  fit->add_option("--out", ft_out)->required();
  fit->add_flag("--per-image", ft_per_image, "fit each image independently (baseline)");

  // standardize
  auto* stdz = app.add_subcommand("standardize", "render standardized expressive RGB-D");
  std::string st_basis, st_fit, st_coeffs, st_out;
  stdz->add_option("--basis", st_basis)->required();
  stdz->add_option("--fit", st_fit, "fit output directory");
  stdz->add_option("--coeffs", st_coeffs, "single coefficient file");
  stdz->add_option("--out", st_out)->required();

  // eval-lmd
  auto* eval_lmd = app.add_subcommand("eval-lmd", "mixed-coefficient lip LMD protocol");
  std::string el_basis, el_data, el_fit, el_select = "beta", el_out;
  int el_groups = 1;
  bool el_weighted = false;
  eval_lmd->add_option("--basis", el_basis)->required();
  eval_lmd->add_option("--data", el_data, "dataset with gt/ sidecars")->required();
  eval_lmd->add_option("--fit", el_fit)->required();
  eval_lmd->add_option("--select", el_select, "attributes taken from the fit (default beta)");
  eval_lmd->add_option("--groups", el_groups, "number of groups for min/max/avg");
  eval_lmd->add_flag("--weighted", el_weighted, "use the lip-weighted loss form instead of lip-only");
  eval_lmd->add_option("--out", el_out)->required();

  // eval-sync
  auto* eval_sync = app.add_subcommand("eval-sync", "offset determination and ASD metrics");
  std::string es_visual, es_audio, es_pairs, es_tracks, es_out;
  int es_gt_offset = 0;
  eval_sync->add_option("--visual", es_visual);
  eval_sync->add_option("--audio", es_audio);
  auto* gt_opt = eval_sync->add_option("--gt-offset", es_gt_offset);
  eval_sync->add_option("--pairs", es_pairs, "file of 'visual audio gt_offset' lines");
  eval_sync->add_option("--tracks", es_tracks, "file of 'visual audio active|inactive' lines");
  eval_sync->add_option("--out", es_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const PipelineConfig cfg = load_pipeline_config(config_path);
    if (gen_basis->parsed()) return cmd_gen_basis(cfg, seed, gb_out, gb_vertices, gb_dims);
    if (gen_scene->parsed())
      return cmd_gen_scene(cfg, seed, gs_basis, gs_out, gs_collections, gs_frames);
    if (synth->parsed()) return cmd_synth(cfg, sy_basis, sy_coeffs, sy_out);
    if (fit->parsed()) return cmd_fit(cfg, ft_basis, ft_data, ft_out, ft_per_image, threads);
    if (stdz->parsed()) {
      if (st_fit.empty() == st_coeffs.empty())
        throw std::runtime_error("standardize: pass exactly one of --fit or --coeffs");
      return cmd_standardize(cfg, st_basis, st_fit, st_coeffs, st_out);
    }
    if (eval_lmd->parsed())
      return cmd_eval_lmd(cfg, el_basis, el_data, el_fit, el_select, el_groups, el_weighted,
                          el_out);
    if (eval_sync->parsed()) {
      if (es_tracks.empty() && es_pairs.empty() && (es_visual.empty() || es_audio.empty()))
        throw std::runtime_error("eval-sync: pass --tracks, --pairs, or --visual/--audio");
      return cmd_eval_sync(cfg, es_visual, es_audio, es_gt_offset, gt_opt->count() > 0, es_pairs,
                           es_tracks, es_out);
    }
    throw std::runtime_error("no subcommand");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
