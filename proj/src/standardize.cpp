#include "facepipe/standardize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "facepipe/landmarks.hpp"
#include "facepipe/rng.hpp"

namespace facepipe {

Illumination uniform_white_gamma() {
  double dc = 2.0 * std::sqrt(3.14159265358979323846);
  if (dc * kShC0 != 1.0) {
    // Walk ulps until the product rounds to exactly 1; stays within a few
    // ulps of 2*sqrt(pi).
    for (int i = 0; i < 8 && dc * kShC0 != 1.0; ++i)
      dc = std::nextafter(dc, dc * kShC0 < 1.0 ? 2.0 * dc : 0.0);
    if (dc * kShC0 != 1.0)
      throw std::runtime_error("uniform_white_gamma: no exact-unit DC value found");
  }
  Illumination g;
  g.gamma[0] = g.gamma[9] = g.gamma[18] = dc;
  return g;
}

namespace {

double working_distance(const MorphableBasis& basis, const Camera& cam) {
  double radius = 0.0;
  for (int v = 0; v < basis.vertex_count(); ++v) {
    radius = std::max(radius, std::abs(basis.mean_shape[3 * v]));
    radius = std::max(radius, std::abs(basis.mean_shape[3 * v + 1]));
  }
  const double target_px = 0.85 * std::min(cam.width, cam.height);
  return cam.focal * 2.0 * radius / target_px;
}

Eigen::Vector3d bbox_center(const Eigen::VectorXd& shape) {
  Eigen::Vector3d lo(1e30, 1e30, 1e30), hi(-1e30, -1e30, -1e30);
  for (Eigen::Index v = 0; v < shape.size() / 3; ++v) {
    lo = lo.cwiseMin(shape.segment<3>(3 * v));
    hi = hi.cwiseMax(shape.segment<3>(3 * v));
  }
  return 0.5 * (lo + hi);
}

}  // namespace

StandardizationDefaults make_defaults(const MorphableBasis& basis, const Camera& cam) {
  StandardizationDefaults d;
  d.gamma0 = uniform_white_gamma();
  d.cam0 = cam;
  d.pose0.euler.setZero();
  d.pose0.translation =
      Eigen::Vector3d(0, 0, -working_distance(basis, cam)) - bbox_center(basis.mean_shape);
  return d;
}

StandardizedFrame standardize_image(const MorphableBasis& basis, const Eigen::VectorXd& beta,
                                    const StandardizationDefaults& defaults) {
  CoefficientSet c = zero_coefficients(basis);
  c.beta = beta;
  c.gamma = defaults.gamma0;
  c.pose = defaults.pose0;
  StandardizedFrame frame;
  frame.rgb = render(basis, c, defaults.cam0);
  frame.pseudo_depth = render_pseudo_depth(basis, c, defaults.cam0);
  return frame;
}

std::vector<StandardizedFrame> standardize_collection(const MorphableBasis& basis,
                                                      const CollectionEstimate& estimate,
                                                      const StandardizationDefaults& defaults) {
  std::vector<StandardizedFrame> out;
  out.reserve(estimate.per_image.size());
  for (const auto& pi : estimate.per_image)
    out.push_back(standardize_image(basis, pi.beta, defaults));
  return out;
}

void write_standardized_frames(const std::vector<StandardizedFrame>& frames,
                               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw std::runtime_error("cannot open for write: " + (dir / "manifest.txt").string());
  char name[64];
  for (size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "%04zu_rgb.ppm", i);
    const std::string rgb_name = name;
    std::snprintf(name, sizeof(name), "%04zu_depth.pgm", i);
    const std::string depth_name = name;
    write_ppm(frames[i].rgb.rgb, dir / rgb_name);
    write_pgm16(frames[i].pseudo_depth.value, dir / depth_name);
    manifest << i << " " << rgb_name << " " << depth_name << "\n";
  }
  if (!manifest) throw std::runtime_error("manifest write failed");
}

SyntheticScene generate_synthetic_scene(const MorphableBasis& basis, std::uint64_t seed, int m,
                                        const Camera& cam, const SceneConfig& config,
                                        const std::filesystem::path& out_dir,
                                        const std::string& collection_id) {
  if (m < 1) throw std::invalid_argument("generate_synthetic_scene: m must be >= 1");
  Rng rng(Rng::substream(seed, "scene"));
  Rng noise_rng(Rng::substream(seed, "landmark_noise"));

  const StandardizationDefaults defaults = make_defaults(basis, cam);
  const Illumination white = defaults.gamma0;

  Eigen::VectorXd alpha(basis.dim_id());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha[i] = config.sigma_id * rng.normal();
  Eigen::VectorXd delta(basis.dim_tex());
  for (Eigen::Index i = 0; i < delta.size(); ++i) delta[i] = config.sigma_tex * rng.normal();

  const std::filesystem::path col_dir = out_dir / collection_id;
  const std::filesystem::path gt_dir = col_dir / "gt";
  std::filesystem::create_directories(gt_dir);

  SyntheticScene scene;
  for (int f = 0; f < m; ++f) {
    CoefficientSet c;
    c.alpha = alpha;
    c.delta = delta;
    c.beta.resize(basis.dim_exp());
    for (Eigen::Index i = 0; i < c.beta.size(); ++i) c.beta[i] = config.sigma_exp * rng.normal();

    c.pose.euler = Eigen::Vector3d(rng.uniform(-config.euler_range, config.euler_range),
                                   rng.uniform(-config.euler_range, config.euler_range),
                                   rng.uniform(-config.euler_range, config.euler_range));
    const double depth_jitter = 1.0 + rng.uniform(-config.depth_range, config.depth_range);
    c.pose.translation =
        defaults.pose0.translation.cwiseProduct(Eigen::Vector3d(1, 1, depth_jitter)) +
        Eigen::Vector3d(rng.uniform(-config.shift_range, config.shift_range),
                        rng.uniform(-config.shift_range, config.shift_range), 0.0);

    for (int ch = 0; ch < 3; ++ch) {
      c.gamma.gamma[9 * ch] =
          white.gamma[0] * (1.0 + rng.uniform(-config.light_dc_range, config.light_dc_range));
      for (int b = 1; b < 9; ++b)
        c.gamma.gamma[9 * ch + b] =
            rng.uniform(-config.light_band_range, config.light_band_range);
    }

    char frame_name[32];
    std::snprintf(frame_name, sizeof(frame_name), "frame%03d", f);
    const RenderedImage img = render(basis, c, cam);
    write_ppm(img.rgb, col_dir / (std::string(frame_name) + ".ppm"));

    LandmarkSet lms = reproject_landmarks(basis, c, cam);
    if (config.landmark_noise > 0.0)
      for (Eigen::Index i = 0; i < lms.size(); ++i) {
        lms.points(i, 0) += config.landmark_noise * noise_rng.normal();
        lms.points(i, 1) += config.landmark_noise * noise_rng.normal();
      }
    write_landmarks(lms, col_dir / (std::string(frame_name) + ".lmk"));

    write_coefficients(c, gt_dir / (std::string(frame_name) + ".coeffs"));
    scene.ground_truth.push_back(std::move(c));
  }
  return scene;
}

}  // namespace facepipe
