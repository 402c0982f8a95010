#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "facepipe/basis.hpp"
#include "facepipe/coefficients.hpp"
#include "facepipe/collections.hpp"
#include "facepipe/landmarks.hpp"
#include "facepipe/losses.hpp"

namespace facepipe {

// Joint estimate for one collection: identity and texture are stored once
// and shared by construction; expression, pose and illumination vary per
// image.
struct CollectionEstimate {
  Eigen::VectorXd alpha;  // shared identity, D_id
  Eigen::VectorXd delta;  // shared texture, D_tex

  struct PerImage {
    Eigen::VectorXd beta;
    Pose pose;
    Illumination gamma;
  };
  std::vector<PerImage> per_image;

  CoefficientSet coefficients(size_t image) const;
};

struct FitConfig {
  LossWeights weights;
  int outer_iterations = 20;
  int landmark_gn_iterations = 8;  // Gauss-Newton steps per geometry stage
  double damping_init = 1e-3;      // x10 on reject, /10 on accept
  double damping_cap = 1e14;
  double convergence_tol = 1e-6;   // relative total-loss decrease
  double irls_floor = 1e-9;        // px, floors the 1/distance reweighting
  double invalid_penalty = 1e4;    // px, behind-camera landmark distance
  bool optimize_pose = true;
};

// One frame loaded into memory.
struct ObservedImage {
  ImageRGB image;
  LandmarkSet landmarks;
  std::optional<ImageGray> skin;
};

struct LoadedCollection {
  std::string id;
  std::vector<ObservedImage> images;
};

LoadedCollection load_collection(const Collection& col);

struct FitResult {
  CollectionEstimate estimate;
  std::vector<LossBreakdown> loss_trace;  // totals non-increasing
};

// Collection-constrained analysis by synthesis. Each outer iteration runs
// a damped Gauss-Newton pass on the landmark objective over the stacked
// variable [alpha; beta_i, pose_i...] (identity rows accumulate over every
// image, which is what couples the collection), then linear illumination
// and shared-texture solves on sparse photometric samples, then records
// the full dense loss over the collection and stops once its relative
// decrease falls under the tolerance. An iteration that would increase the
// recorded loss is rolled back.
FitResult fit_collection(const MorphableBasis& basis, const LoadedCollection& collection,
                         const Camera& cam, const FitConfig& cfg);

struct PerImageFitResult {
  std::vector<CoefficientSet> estimates;
  std::vector<std::vector<LossBreakdown>> traces;
};

// Baseline without the sharing constraint: every image is fitted alone
// with its own identity and texture.
PerImageFitResult fit_per_image(const MorphableBasis& basis, const LoadedCollection& collection,
                                const Camera& cam, const FitConfig& cfg);

// --- building blocks, exposed for verification ------------------------------

// Predicted landmarks plus analytic derivatives of their pixel positions.
struct LandmarkJacobian {
  LandmarkSet predicted;
  Eigen::MatrixXd d_alpha;  // 2N x D_id, rows (2n, 2n+1) = du_n, dv_n
  Eigen::MatrixXd d_beta;   // 2N x D_exp
  Eigen::MatrixXd d_pose;   // 2N x 6 (pitch yaw roll tx ty tz)
};

LandmarkJacobian landmark_jacobian(const MorphableBasis& basis, const Eigen::VectorXd& alpha,
                                   const Eigen::VectorXd& beta, const Pose& pose,
                                   const Camera& cam);

// Landmark vertices plus their one-ring mesh neighbours, sorted.
std::vector<std::uint32_t> photometric_sample_vertices(const MorphableBasis& basis);

// Per-visible-sample quantities for the linear illumination/texture stage.
// A sample vertex is used when it projects inside the image in front of the
// camera with its normal toward the camera.
struct PhotoSamples {
  std::vector<std::uint32_t> vertices;
  Eigen::MatrixXd sh;                        // n x 9, SH basis at the posed normal
  Eigen::MatrixXd observed;                  // n x 3, bilinear sample of the input
  Eigen::MatrixXd tex_mean;                  // n x 3
  std::array<Eigen::MatrixXd, 3> tex_basis;  // per channel: n x D_tex
};

PhotoSamples build_photo_samples(const MorphableBasis& basis,
                                 const std::vector<std::uint32_t>& sample_vertices,
                                 const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                                 const Pose& pose, const Camera& cam, const ImageRGB& observed);

// Least-squares illumination given the current texture; the radiosity
// model is linear in gamma, and the three channels decouple into 9x9
// normal equations. Throws when a channel system is singular.
Illumination solve_gamma(const PhotoSamples& samples, const Eigen::VectorXd& delta);

// Coupled ridge least squares for the shared texture given every image's
// illumination; Tikhonov weight omega_delta comes from the Gaussian prior.
Eigen::VectorXd solve_delta(const std::vector<PhotoSamples>& samples,
                            const std::vector<Illumination>& gammas, double omega_delta);

// Closed-form 2D similarity (Procrustes) pose initialization from detected
// landmarks, plus a DC illumination guess matching mean brightness inside
// the landmark bounding box.
Pose initialize_pose(const MorphableBasis& basis, const LandmarkSet& detected, const Camera& cam);
Illumination initialize_gamma(const MorphableBasis& basis, const ObservedImage& obs);

// CSV with one row per outer iteration: iter,photometric,landmark,reg,total.
void write_loss_trace(const std::vector<LossBreakdown>& trace,
                      const std::filesystem::path& path);

}  // namespace facepipe
