#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "facepipe/basis.hpp"
#include "facepipe/coefficients.hpp"
#include "facepipe/scene.hpp"

namespace facepipe {

// 2D landmark positions in pixels. `valid` is false for landmarks whose
// vertex fell at or behind the camera plane during reprojection; detected
// landmark sets are always fully valid.
struct LandmarkSet {
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;
  std::vector<std::uint8_t> valid;

  static LandmarkSet all_valid(Eigen::Matrix<double, Eigen::Dynamic, 2> pts);
  Eigen::Index size() const { return points.rows(); }
};

struct LandmarkWeights {
  Eigen::VectorXd w;
};

// Weight 1 everywhere, `lip_weight` on [lip_begin, lip_end).
LandmarkWeights standard_weights(int n, double lip_weight = 10.0, int lip_begin = kLipBegin,
                                 int lip_end = kLipEnd);

// Uniform weights over the lip slots only, zero elsewhere - the metric
// variant used for lip-fit evaluation.
LandmarkWeights lip_only_weights(int n, int lip_begin = kLipBegin, int lip_end = kLipEnd);

// Projects the posed assembled shape's landmark vertices.
LandmarkSet reproject_landmarks(const MorphableBasis& basis, const CoefficientSet& coeffs,
                                const Camera& cam);

// Mean weighted Euclidean distance, (1/N) * sum w_n |l_n - l'_n|. Landmark
// pairs where either side is invalid contribute `invalid_penalty` pixels
// instead of a distance, steering fits away from degenerate poses.
double lmd(const LandmarkSet& a, const LandmarkSet& b, const LandmarkWeights& w,
           double invalid_penalty = 1e4);

// Mean of one collection's per-datum values. Throws on empty input.
double collection_lmd(const std::vector<double>& datum_lmds);

// Mean of collection means (not the flat datum mean).
double group_lmd(const std::vector<std::vector<double>>& collections);

struct GroupLmdStats {
  std::vector<double> per_group;
  double min = 0.0;
  double max = 0.0;
  double avg = 0.0;
};

// min/max/avg of group LMDs across groups, each group a list of
// collections, each collection a list of datum LMDs.
GroupLmdStats group_lmd_stats(const std::vector<std::vector<std::vector<double>>>& groups);

// Landmark file: one "u v" line per landmark.
void write_landmarks(const LandmarkSet& lms, const std::filesystem::path& path);
LandmarkSet read_landmarks(const std::filesystem::path& path);

}  // namespace facepipe
