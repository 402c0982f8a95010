#include "facepipe/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "facepipe/render.hpp"

namespace facepipe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Vector3d landmark_centroid(const MorphableBasis& basis) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (std::uint32_t v : basis.landmark_indices) c += basis.mean_shape.segment<3>(3 * v);
  return c / static_cast<double>(basis.landmark_indices.size());
}

// Working distance placing the mean face across ~85% of the frame.
double working_distance(const MorphableBasis& basis, const Camera& cam) {
  double radius = 0.0;
  for (int v = 0; v < basis.vertex_count(); ++v) {
    radius = std::max(radius, std::abs(basis.mean_shape[3 * v]));
    radius = std::max(radius, std::abs(basis.mean_shape[3 * v + 1]));
  }
  const double target_px = 0.85 * std::min(cam.width, cam.height);
  return cam.focal * 2.0 * radius / target_px;
}

double bilinear(const ImageRGB& img, double u, double v, int c) {
  const double fx = u - 0.5;
  const double fy = v - 0.5;
  int x0 = static_cast<int>(std::floor(fx));
  int y0 = static_cast<int>(std::floor(fy));
  const double tx = fx - x0;
  const double ty = fy - y0;
  const auto cx = [&](int x) { return std::clamp(x, 0, img.width - 1); };
  const auto cy = [&](int y) { return std::clamp(y, 0, img.height - 1); };
  const double v00 = img.at(cx(x0), cy(y0), c);
  const double v10 = img.at(cx(x0 + 1), cy(y0), c);
  const double v01 = img.at(cx(x0), cy(y0 + 1), c);
  const double v11 = img.at(cx(x0 + 1), cy(y0 + 1), c);
  return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
}

}  // namespace

CoefficientSet CollectionEstimate::coefficients(size_t image) const {
  CoefficientSet c;
  c.alpha = alpha;
  c.delta = delta;
  c.beta = per_image[image].beta;
  c.pose = per_image[image].pose;
  c.gamma = per_image[image].gamma;
  return c;
}

LoadedCollection load_collection(const Collection& col) {
  LoadedCollection out;
  out.id = col.id;
  for (const auto& item : col.items) {
    ObservedImage obs;
    obs.image = read_ppm(item.image);
    obs.landmarks = read_landmarks(item.landmarks);
    if (item.skin) obs.skin = read_pgm16(*item.skin);
    out.images.push_back(std::move(obs));
  }
  return out;
}

LandmarkJacobian landmark_jacobian(const MorphableBasis& basis, const Eigen::VectorXd& alpha,
                                   const Eigen::VectorXd& beta, const Pose& pose,
                                   const Camera& cam) {
  const Eigen::VectorXd shape = assemble_shape(basis, {alpha, beta});
  const Eigen::Matrix3d r = rotation_matrix(pose);
  const std::array<Eigen::Matrix3d, 3> dr = rotation_derivatives(pose);
  const int n = static_cast<int>(basis.landmark_indices.size());

  LandmarkJacobian out;
  out.predicted.points.resize(n, 2);
  out.predicted.valid.assign(static_cast<size_t>(n), 0);
  out.d_alpha = Eigen::MatrixXd::Zero(2 * n, basis.dim_id());
  out.d_beta = Eigen::MatrixXd::Zero(2 * n, basis.dim_exp());
  out.d_pose = Eigen::MatrixXd::Zero(2 * n, 6);

  for (int i = 0; i < n; ++i) {
    const std::uint32_t v = basis.landmark_indices[static_cast<size_t>(i)];
    const Eigen::Vector3d s = shape.segment<3>(3 * v);
    const Eigen::Vector3d q = r * s + pose.translation;
    const Projected proj = project_point(q, cam);
    out.predicted.points(i, 0) = proj.u;
    out.predicted.points(i, 1) = proj.v;
    if (!proj.valid) continue;  // zero rows; the penalty term is flat
    out.predicted.valid[static_cast<size_t>(i)] = 1;

    const double d = proj.depth;
    Eigen::Matrix<double, 2, 3> p;
    p << cam.focal / d, 0.0, cam.focal * q.x() / (d * d),  //
        0.0, -cam.focal / d, -cam.focal * q.y() / (d * d);

    const Eigen::Matrix<double, 2, 3> pr = p * r;
    out.d_alpha.middleRows(2 * i, 2) = pr * basis.basis_id.middleRows(3 * v, 3);
    out.d_beta.middleRows(2 * i, 2) = pr * basis.basis_exp.middleRows(3 * v, 3);
    for (int k = 0; k < 3; ++k) out.d_pose.col(k).segment(2 * i, 2) = p * (dr[k] * s);
    out.d_pose.block(2 * i, 3, 2, 3) = p;
  }
  return out;
}

std::vector<std::uint32_t> photometric_sample_vertices(const MorphableBasis& basis) {
  std::set<std::uint32_t> verts(basis.landmark_indices.begin(), basis.landmark_indices.end());
  std::set<std::uint32_t> ring;
  for (const auto& t : basis.triangles) {
    for (int a = 0; a < 3; ++a)
      if (verts.count(t[a]))
        for (int b = 0; b < 3; ++b) ring.insert(t[b]);
  }
  verts.insert(ring.begin(), ring.end());
  return {verts.begin(), verts.end()};
}

PhotoSamples build_photo_samples(const MorphableBasis& basis,
                                 const std::vector<std::uint32_t>& sample_vertices,
                                 const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                                 const Pose& pose, const Camera& cam, const ImageRGB& observed) {
  const Eigen::VectorXd shape = assemble_shape(basis, {alpha, beta});
  const Eigen::VectorXd posed = transform_vertices(shape, pose);
  const Eigen::VectorXd normals = vertex_normals(posed, basis.triangles);

  std::vector<std::uint32_t> used;
  for (std::uint32_t v : sample_vertices) {
    const Eigen::Vector3d q = posed.segment<3>(3 * v);
    const Eigen::Vector3d n = normals.segment<3>(3 * v);
    if (n.dot(q) >= 0.0) continue;  // facing away from the camera
    const Projected proj = project_point(q, cam);
    if (!proj.valid) continue;
    if (proj.u < 1.0 || proj.u > cam.width - 1.0 || proj.v < 1.0 || proj.v > cam.height - 1.0)
      continue;
    used.push_back(v);
  }

  PhotoSamples s;
  const Eigen::Index n = static_cast<Eigen::Index>(used.size());
  s.vertices = std::move(used);
  s.sh.resize(n, 9);
  s.observed.resize(n, 3);
  s.tex_mean.resize(n, 3);
  for (int c = 0; c < 3; ++c) s.tex_basis[static_cast<size_t>(c)].resize(n, basis.dim_tex());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint32_t v = s.vertices[static_cast<size_t>(i)];
    const std::array<double, 9> phi = sh_basis(normals.segment<3>(3 * v));
    for (int b = 0; b < 9; ++b) s.sh(i, b) = phi[static_cast<size_t>(b)];
    const Projected proj = project_point(posed.segment<3>(3 * v), cam);
    for (int c = 0; c < 3; ++c) {
      s.observed(i, c) = bilinear(observed, proj.u, proj.v, c);
      s.tex_mean(i, c) = basis.mean_texture[3 * v + c];
      s.tex_basis[static_cast<size_t>(c)].row(i) = basis.basis_tex.row(3 * v + c);
    }
  }
  return s;
}

Illumination solve_gamma(const PhotoSamples& samples, const Eigen::VectorXd& delta) {
  const Eigen::Index n = samples.sh.rows();
  if (n < 9) throw std::runtime_error("solve_gamma: too few visible samples");
  Illumination out;
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd tex =
        samples.tex_mean.col(c) + samples.tex_basis[static_cast<size_t>(c)] * delta;
    const Eigen::MatrixXd a = samples.sh.array().colwise() * tex.array();
    const Eigen::VectorXd b = samples.observed.col(c);
    const Eigen::Matrix<double, 9, 9> ata = a.transpose() * a;
    const Eigen::Matrix<double, 9, 1> atb = a.transpose() * b;
    Eigen::LDLT<Eigen::Matrix<double, 9, 9>> ldlt(ata);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("solve_gamma: singular normal equations");
    const Eigen::Matrix<double, 9, 1> g = ldlt.solve(atb);
    if (!g.allFinite()) throw std::runtime_error("solve_gamma: singular normal equations");
    out.gamma.segment<9>(9 * c) = g;
  }
  return out;
}

Eigen::VectorXd solve_delta(const std::vector<PhotoSamples>& samples,
                            const std::vector<Illumination>& gammas, double omega_delta) {
  if (samples.empty() || samples.size() != gammas.size())
    throw std::invalid_argument("solve_delta: inconsistent inputs");
  const Eigen::Index d = samples[0].tex_basis[0].cols();
  Eigen::MatrixXd h = omega_delta * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  for (size_t i = 0; i < samples.size(); ++i) {
    const PhotoSamples& s = samples[i];
    for (int c = 0; c < 3; ++c) {
      // radiance = shade * (mean + B delta); rows are shade-scaled B rows.
      const Eigen::VectorXd shade = s.sh * gammas[i].channel(c);
      const Eigen::MatrixXd rows =
          s.tex_basis[static_cast<size_t>(c)].array().colwise() * shade.array();
      const Eigen::VectorXd target =
          s.observed.col(c) - shade.cwiseProduct(s.tex_mean.col(c));
      h.noalias() += rows.transpose() * rows;
      g.noalias() += rows.transpose() * target;
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("solve_delta: singular normal equations");
  Eigen::VectorXd delta = ldlt.solve(g);
  if (!delta.allFinite()) throw std::runtime_error("solve_delta: singular normal equations");
  return delta;
}

Pose initialize_pose(const MorphableBasis& basis, const LandmarkSet& detected, const Camera& cam) {
  const double d0 = working_distance(basis, cam);
  const Eigen::Vector3d c_lm = landmark_centroid(basis);

  // Reference: mean-shape landmarks projected frontally at the working
  // distance.
  Pose ref;
  ref.translation = Eigen::Vector3d(0, 0, -d0) - c_lm;
  CoefficientSet refc;
  refc.alpha = Eigen::VectorXd::Zero(basis.dim_id());
  refc.beta = Eigen::VectorXd::Zero(basis.dim_exp());
  refc.delta = Eigen::VectorXd::Zero(basis.dim_tex());
  refc.pose = ref;
  const LandmarkSet ref_lms = reproject_landmarks(basis, refc, cam);

  const Eigen::Index n = detected.size();
  if (ref_lms.size() != n) throw std::invalid_argument("initialize_pose: landmark count mismatch");

  const Eigen::RowVector2d ref_mean = ref_lms.points.colwise().mean();
  const Eigen::RowVector2d det_mean = detected.points.colwise().mean();
  double a = 0.0, b = 0.0, rr = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVector2d r = ref_lms.points.row(i) - ref_mean;
    const Eigen::RowVector2d d = detected.points.row(i) - det_mean;
    a += r.dot(d);
    b += r.x() * d.y() - r.y() * d.x();
    rr += r.squaredNorm();
  }
  const double theta = std::atan2(b, a);
  double scale = std::sqrt(a * a + b * b) / std::max(rr, 1e-12);
  scale = std::clamp(scale, 0.05, 20.0);

  // An in-plane rotation by theta in pixel space (y down) is a roll of
  // -theta about the camera axis; the spread ratio fixes the depth.
  Pose pose;
  pose.euler = Eigen::Vector3d(0.0, 0.0, -theta);
  const double depth = d0 / scale;
  const Eigen::Vector3d target((det_mean.x() - cam.principal.x()) * depth / cam.focal,
                               -(det_mean.y() - cam.principal.y()) * depth / cam.focal, -depth);
  pose.translation = target - rotation_matrix(pose) * c_lm;
  return pose;
}

Illumination initialize_gamma(const MorphableBasis& basis, const ObservedImage& obs) {
  double lo_u = kInf, hi_u = -kInf, lo_v = kInf, hi_v = -kInf;
  for (Eigen::Index i = 0; i < obs.landmarks.size(); ++i) {
    lo_u = std::min(lo_u, obs.landmarks.points(i, 0));
    hi_u = std::max(hi_u, obs.landmarks.points(i, 0));
    lo_v = std::min(lo_v, obs.landmarks.points(i, 1));
    hi_v = std::max(hi_v, obs.landmarks.points(i, 1));
  }
  const int x0 = std::clamp(static_cast<int>(lo_u), 0, obs.image.width - 1);
  const int x1 = std::clamp(static_cast<int>(hi_u), x0, obs.image.width - 1);
  const int y0 = std::clamp(static_cast<int>(lo_v), 0, obs.image.height - 1);
  const int y1 = std::clamp(static_cast<int>(hi_v), y0, obs.image.height - 1);

  Eigen::Vector3d mean_obs = Eigen::Vector3d::Zero();
  int count = 0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x, ++count)
      for (int c = 0; c < 3; ++c) mean_obs[c] += obs.image.at(x, y, c);
  if (count > 0) mean_obs /= count;

  Eigen::Vector3d mean_tex = Eigen::Vector3d::Zero();
  for (int v = 0; v < basis.vertex_count(); ++v)
    mean_tex += basis.mean_texture.segment<3>(3 * v);
  mean_tex /= basis.vertex_count();

  Illumination g;
  for (int c = 0; c < 3; ++c)
    g.gamma[9 * c] = mean_obs[c] / (kShC0 * std::max(mean_tex[c], 1e-3));
  return g;
}

// --- geometry stage ----------------------------------------------------------

namespace {

// Stacked geometry variable: [alpha; beta_0; pose_0; ...], pose packed as
// (pitch, yaw, roll, tx, ty, tz).
struct GeometryState {
  Eigen::VectorXd alpha;
  std::vector<Eigen::VectorXd> beta;
  std::vector<Pose> pose;
};

struct GeometryProblem {
  const MorphableBasis* basis;
  const LoadedCollection* collection;
  const Camera* cam;
  const FitConfig* cfg;
  LandmarkWeights lw;

  int d_id() const { return basis->dim_id(); }
  int d_exp() const { return basis->dim_exp(); }
  int image_block() const { return d_exp() + 6; }
  int dim() const {
    return d_id() + static_cast<int>(collection->images.size()) * image_block();
  }

  // True stage objective: weighted landmark distances plus the Gaussian
  // priors on alpha and beta. +inf when a pose puts the mean landmark
  // behind the camera (front/back flip guard).
  double objective(const GeometryState& s) const {
    const LossWeights& w = cfg->weights;
    double total = w.lambda_reg * w.omega_alpha * s.alpha.squaredNorm();
    for (size_t i = 0; i < collection->images.size(); ++i) {
      total += w.lambda_reg * w.omega_beta * s.beta[i].squaredNorm();
      CoefficientSet c;
      c.alpha = s.alpha;
      c.beta = s.beta[i];
      c.delta = Eigen::VectorXd::Zero(basis->dim_tex());
      c.pose = s.pose[i];
      const LandmarkSet pred = reproject_landmarks(*basis, c, *cam);
      int n_valid = 0;
      for (auto fl : pred.valid) n_valid += fl;
      if (n_valid * 2 < static_cast<int>(pred.valid.size())) return kInf;
      total += w.lambda_lan *
               lmd(collection->images[i].landmarks, pred, lw, cfg->invalid_penalty);
    }
    return total;
  }
};

// One damped Gauss-Newton pass (IRLS weights refresh every step). Returns
// the objective after the pass.
double geometry_stage(const GeometryProblem& prob, GeometryState& state, double& damping) {
  const FitConfig& cfg = *prob.cfg;
  const LossWeights& w = cfg.weights;
  const int m = static_cast<int>(prob.collection->images.size());
  const int dim = prob.dim();
  const int n_lmk = static_cast<int>(prob.basis->landmark_indices.size());

  double current = prob.objective(state);
  if (!std::isfinite(current) && current != kInf)
    throw std::runtime_error("fit: geometry objective is not finite");

  for (int step = 0; step < cfg.landmark_gn_iterations; ++step) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    h.topLeftCorner(prob.d_id(), prob.d_id()) +=
        2.0 * w.lambda_reg * w.omega_alpha *
        Eigen::MatrixXd::Identity(prob.d_id(), prob.d_id());
    g.head(prob.d_id()) += 2.0 * w.lambda_reg * w.omega_alpha * state.alpha;

    for (int i = 0; i < m; ++i) {
      const int off = prob.d_id() + i * prob.image_block();
      const int cols = prob.d_id() + prob.image_block();
      const LandmarkJacobian jac =
          landmark_jacobian(*prob.basis, state.alpha, state.beta[static_cast<size_t>(i)],
                            state.pose[static_cast<size_t>(i)], *prob.cam);
      const LandmarkSet& det = prob.collection->images[static_cast<size_t>(i)].landmarks;

      // IRLS: each |r| term is modelled as |r|^2 / max(|r|, floor), which
      // matches the unsquared landmark loss's gradient at the current point.
      Eigen::MatrixXd jw = Eigen::MatrixXd::Zero(2 * n_lmk, cols);
      Eigen::VectorXd rw = Eigen::VectorXd::Zero(2 * n_lmk);
      for (int l = 0; l < n_lmk; ++l) {
        if (!jac.predicted.valid[static_cast<size_t>(l)]) continue;
        const Eigen::Vector2d r =
            jac.predicted.points.row(l).transpose() - det.points.row(l).transpose();
        const double dist = std::max(r.norm(), cfg.irls_floor);
        const double sqc = std::sqrt(w.lambda_lan * prob.lw.w[l] / (n_lmk * dist));
        jw.block(2 * l, 0, 2, prob.d_id()) = sqc * jac.d_alpha.middleRows(2 * l, 2);
        jw.block(2 * l, prob.d_id(), 2, prob.d_exp()) = sqc * jac.d_beta.middleRows(2 * l, 2);
        if (cfg.optimize_pose)
          jw.block(2 * l, prob.d_id() + prob.d_exp(), 2, 6) =
              sqc * jac.d_pose.middleRows(2 * l, 2);
        rw.segment<2>(2 * l) = sqc * r;
      }

      const Eigen::MatrixXd jtj = jw.transpose() * jw;
      const Eigen::VectorXd jtr = jw.transpose() * rw;
      h.topLeftCorner(prob.d_id(), prob.d_id()) += jtj.topLeftCorner(prob.d_id(), prob.d_id());
      h.block(0, off, prob.d_id(), prob.image_block()) +=
          jtj.topRightCorner(prob.d_id(), prob.image_block());
      h.block(off, 0, prob.image_block(), prob.d_id()) +=
          jtj.bottomLeftCorner(prob.image_block(), prob.d_id());
      h.block(off, off, prob.image_block(), prob.image_block()) +=
          jtj.bottomRightCorner(prob.image_block(), prob.image_block());
      g.head(prob.d_id()) += jtr.head(prob.d_id());
      g.segment(off, prob.image_block()) += jtr.tail(prob.image_block());

      h.block(off, off, prob.d_exp(), prob.d_exp()) +=
          2.0 * w.lambda_reg * w.omega_beta *
          Eigen::MatrixXd::Identity(prob.d_exp(), prob.d_exp());
      g.segment(off, prob.d_exp()) +=
          2.0 * w.lambda_reg * w.omega_beta * state.beta[static_cast<size_t>(i)];
    }

    const Eigen::VectorXd diag = h.diagonal().cwiseMax(1e-12);
    int rejects = 0;
    bool accepted = false;
    while (true) {
      Eigen::MatrixXd damped = h;
      damped.diagonal() += damping * diag;
      const Eigen::VectorXd step_vec = Eigen::LDLT<Eigen::MatrixXd>(damped).solve(-g);
      if (!step_vec.allFinite()) {
        damping *= 10.0;
        if (damping > cfg.damping_cap)
          throw std::runtime_error("fit: singular normal equations at damping cap");
        continue;
      }
      GeometryState trial = state;
      trial.alpha += step_vec.head(prob.d_id());
      for (int i = 0; i < m; ++i) {
        const int off = prob.d_id() + i * prob.image_block();
        trial.beta[static_cast<size_t>(i)] += step_vec.segment(off, prob.d_exp());
        if (cfg.optimize_pose) {
          trial.pose[static_cast<size_t>(i)].euler +=
              step_vec.segment<3>(off + prob.d_exp());
          trial.pose[static_cast<size_t>(i)].translation +=
              step_vec.segment<3>(off + prob.d_exp() + 3);
        }
      }
      const double trial_obj = prob.objective(trial);
      if (std::isnan(trial_obj)) throw std::runtime_error("fit: objective diverged to NaN");
      if (trial_obj < current) {
        state = std::move(trial);
        current = trial_obj;
        damping = std::max(damping / 10.0, 1e-12);
        accepted = true;
        break;
      }
      damping *= 10.0;
      if (++rejects >= 3) break;  // stalled; give the stage back
      if (damping > cfg.damping_cap)
        throw std::runtime_error("fit: singular normal equations at damping cap");
    }
    if (!accepted) break;
  }
  return current;
}

}  // namespace

FitResult fit_collection(const MorphableBasis& basis, const LoadedCollection& collection,
                         const Camera& cam, const FitConfig& cfg) {
  if (collection.images.empty())
    throw std::invalid_argument("fit_collection: empty collection");
  const int m = static_cast<int>(collection.images.size());
  const int n_lmk = static_cast<int>(basis.landmark_indices.size());
  for (const auto& obs : collection.images)
    if (obs.landmarks.size() != n_lmk)
      throw std::invalid_argument("fit_collection: landmark count mismatch");

  CollectionEstimate est;
  est.alpha = Eigen::VectorXd::Zero(basis.dim_id());
  est.delta = Eigen::VectorXd::Zero(basis.dim_tex());
  for (int i = 0; i < m; ++i) {
    CollectionEstimate::PerImage pi;
    pi.beta = Eigen::VectorXd::Zero(basis.dim_exp());
    pi.pose = initialize_pose(basis, collection.images[static_cast<size_t>(i)].landmarks, cam);
    pi.gamma = initialize_gamma(basis, collection.images[static_cast<size_t>(i)]);
    est.per_image.push_back(std::move(pi));
  }

  const std::vector<std::uint32_t> sample_verts = photometric_sample_vertices(basis);
  const LandmarkWeights lw = standard_weights(n_lmk, cfg.weights.lip_weight);

  auto record = [&](std::vector<LossBreakdown>& trace) {
    LossBreakdown mean;
    for (int i = 0; i < m; ++i) {
      const auto& obs = collection.images[static_cast<size_t>(i)];
      SkinMask skin;
      const SkinMask* skin_ptr = nullptr;
      if (obs.skin) {
        skin.a = *obs.skin;
        skin_ptr = &skin;
      }
      const LossBreakdown b = total_loss(obs.image, obs.landmarks, basis,
                                         est.coefficients(static_cast<size_t>(i)), cam,
                                         skin_ptr, cfg.weights);
      mean.photometric += b.photometric / m;
      mean.landmark += b.landmark / m;
      mean.regularization += b.regularization / m;
      mean.total += b.total / m;
    }
    trace.push_back(mean);
  };

  FitResult result;
  record(result.loss_trace);

  GeometryProblem prob{&basis, &collection, &cam, &cfg, lw};
  double damping = cfg.damping_init;

  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    const CollectionEstimate snapshot = est;

    GeometryState gs;
    gs.alpha = est.alpha;
    for (int i = 0; i < m; ++i) {
      gs.beta.push_back(est.per_image[static_cast<size_t>(i)].beta);
      gs.pose.push_back(est.per_image[static_cast<size_t>(i)].pose);
    }
    geometry_stage(prob, gs, damping);
    est.alpha = gs.alpha;
    for (int i = 0; i < m; ++i) {
      est.per_image[static_cast<size_t>(i)].beta = gs.beta[static_cast<size_t>(i)];
      est.per_image[static_cast<size_t>(i)].pose = gs.pose[static_cast<size_t>(i)];
    }

    // Illumination per image, then the coupled shared-texture solve.
    std::vector<PhotoSamples> samples;
    std::vector<Illumination> gammas;
    bool texture_ok = true;
    for (int i = 0; i < m; ++i) {
      PhotoSamples s = build_photo_samples(
          basis, sample_verts, est.alpha, est.per_image[static_cast<size_t>(i)].beta,
          est.per_image[static_cast<size_t>(i)].pose, cam,
          collection.images[static_cast<size_t>(i)].image);
      if (s.sh.rows() < 9) {
        texture_ok = false;
        break;
      }
      Illumination gamma = solve_gamma(s, est.delta);
      est.per_image[static_cast<size_t>(i)].gamma = gamma;
      gammas.push_back(gamma);
      samples.push_back(std::move(s));
    }
    if (texture_ok) est.delta = solve_delta(samples, gammas, cfg.weights.omega_delta);

    record(result.loss_trace);
    const double prev = result.loss_trace[result.loss_trace.size() - 2].total;
    const double now = result.loss_trace.back().total;
    if (now > prev) {
      // Roll back: the sparse-sample stages are a surrogate for the dense
      // loss and may overshoot near convergence.
      est = snapshot;
      result.loss_trace.pop_back();
      break;
    }
    if (prev - now < cfg.convergence_tol * std::max(prev, 1e-12)) break;
  }

  result.estimate = std::move(est);
  return result;
}

PerImageFitResult fit_per_image(const MorphableBasis& basis, const LoadedCollection& collection,
                                const Camera& cam, const FitConfig& cfg) {
  PerImageFitResult out;
  for (size_t i = 0; i < collection.images.size(); ++i) {
    LoadedCollection single;
    single.id = collection.id + "/" + std::to_string(i);
    single.images.push_back(collection.images[i]);
    FitResult r = fit_collection(basis, single, cam, cfg);
    out.estimates.push_back(r.estimate.coefficients(0));
    out.traces.push_back(std::move(r.loss_trace));
  }
  return out;
}

void write_loss_trace(const std::vector<LossBreakdown>& trace,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << "iteration,photometric,landmark,regularization,total\n";
  char buf[160];
  for (size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i, trace[i].photometric,
                  trace[i].landmark, trace[i].regularization, trace[i].total);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace facepipe
