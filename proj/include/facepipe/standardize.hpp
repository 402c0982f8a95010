#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "facepipe/basis.hpp"
#include "facepipe/coefficients.hpp"
#include "facepipe/fitter.hpp"
#include "facepipe/render.hpp"

namespace facepipe {

// Attribute defaults used for standardized synthesis: uniform white light,
// frontal pose at the camera's working distance, mean identity/texture.
struct StandardizationDefaults {
  Illumination gamma0;
  Pose pose0;
  Camera cam0;
};

// DC-only illumination whose shading factor is exactly 1.0: the stored DC
// value is the double nearest 2*sqrt(pi) for which dc*Phi_0 rounds to 1.
Illumination uniform_white_gamma();

// Frontal defaults for the given basis/camera; the face spans ~85% of the
// frame.
StandardizationDefaults make_defaults(const MorphableBasis& basis, const Camera& cam);

struct StandardizedFrame {
  RenderedImage rgb;
  GrayRender pseudo_depth;
};

// Renders the expression-only coefficient set {alpha=0, delta=0, beta,
// gamma0, pose0}: a pure function of (basis, beta, defaults).
StandardizedFrame standardize_image(const MorphableBasis& basis, const Eigen::VectorXd& beta,
                                    const StandardizationDefaults& defaults);

// Applies standardize_image to each per-image expression, preserving order.
std::vector<StandardizedFrame> standardize_collection(const MorphableBasis& basis,
                                                      const CollectionEstimate& estimate,
                                                      const StandardizationDefaults& defaults);

// Writes <index>_rgb.ppm / <index>_depth.pgm pairs plus a manifest with
// lines "<index> <rgb path> <depth path>".
void write_standardized_frames(const std::vector<StandardizedFrame>& frames,
                               const std::filesystem::path& dir);

// Coefficient ranges for synthetic scene generation.
struct SceneConfig {
  double sigma_id = 0.7;      // shared alpha ~ N(0, sigma^2)
  double sigma_tex = 0.5;     // shared delta
  double sigma_exp = 0.5;     // per-frame beta
  double euler_range = 0.22;  // per-frame |pitch|,|yaw|,|roll| bound (rad)
  double shift_range = 0.25;  // per-frame in-plane translation bound (units)
  double depth_range = 0.08;  // relative working-distance jitter
  double light_dc_range = 0.25;    // relative DC jitter around white
  double light_band_range = 0.25;  // absolute band-1/2 coefficient bound
  double landmark_noise = 0.0;     // px, additive on written landmark files
};

struct SyntheticScene {
  std::vector<CoefficientSet> ground_truth;  // one per frame
};

// Draws one collection (shared alpha/delta, per-frame beta/pose/gamma),
// renders observed frames, writes the dataset layout
//   out_dir/<collection_id>/<frame>.ppm + .lmk
// and a ground-truth sidecar under <collection_id>/gt/. Landmark files get
// optional additive noise; the sidecar stays exact.
SyntheticScene generate_synthetic_scene(const MorphableBasis& basis, std::uint64_t seed, int m,
                                        const Camera& cam, const SceneConfig& config,
                                        const std::filesystem::path& out_dir,
                                        const std::string& collection_id);

}  // namespace facepipe
