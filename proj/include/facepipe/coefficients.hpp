#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>

#include "facepipe/basis.hpp"
#include "facepipe/scene.hpp"

namespace facepipe {

// One image's full parameter vector: identity, expression, texture,
// illumination and pose.
struct CoefficientSet {
  Eigen::VectorXd alpha;  // D_id
  Eigen::VectorXd beta;   // D_exp
  Eigen::VectorXd delta;  // D_tex
  Illumination gamma;
  Pose pose;
};

// Zero coefficients with dims matching the basis; gamma zero, pose identity.
CoefficientSet zero_coefficients(const MorphableBasis& basis);

// Which attributes to take from the estimate when mixing with ground truth.
struct AttributeSelector {
  bool alpha = false;
  bool beta = false;
  bool delta = false;
  bool gamma = false;
  bool pose = false;
};

// Copies selected attributes from `est` over `gt`. Throws on dim mismatch
// of any selected attribute.
CoefficientSet form_mixed_coefficients(const CoefficientSet& gt, const CoefficientSet& est,
                                       const AttributeSelector& take_from_est);

// Plain-text coefficient record, one "name = values" line per attribute:
//   dims = D_id D_exp D_tex
//   alpha = ...            (D_id values)
//   beta = ...             (D_exp values)
//   delta = ...            (D_tex values)
//   gamma = ...            (27 values, channel-major r g b)
//   pose = pitch yaw roll tx ty tz
// Values are printed with enough digits to round-trip doubles exactly.
// Records other than dims are optional on read.
struct CoefficientFile {
  std::optional<Eigen::Vector3i> dims;
  std::optional<Eigen::VectorXd> alpha;
  std::optional<Eigen::VectorXd> beta;
  std::optional<Eigen::VectorXd> delta;
  std::optional<Eigen::VectorXd> gamma;
  std::optional<Eigen::VectorXd> pose;
};

void write_coefficients(const CoefficientSet& c, const std::filesystem::path& path);
CoefficientFile read_coefficient_file(const std::filesystem::path& path);

// Builds a full set from a file; missing alpha/beta/delta become zeros for
// the basis dims, missing gamma/pose fall back to the provided defaults.
CoefficientSet to_coefficient_set(const CoefficientFile& file, const MorphableBasis& basis,
                                  const Illumination& default_gamma, const Pose& default_pose);

}  // namespace facepipe
