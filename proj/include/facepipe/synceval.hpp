#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "facepipe/landmarks.hpp"

namespace facepipe {

// One feature vector per frame. The paper's 0.2 s windows at 0.04 s stride
// imply 25 fps indexing; the rate is carried along but offsets are always
// in frames.
struct FeatureStream {
  Eigen::MatrixXd frames;  // T x D
  double frame_rate = 25.0;
};

// Text format: header "T D frame_rate", then T lines of D values.
void write_feature_stream(const FeatureStream& s, const std::filesystem::path& path);
FeatureStream read_feature_stream(const std::filesystem::path& path);

// a.b / (|a||b|). Throws on a zero-norm input.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct OffsetResult {
  int offset = 0;                // audio index shift that best aligns the streams
  std::vector<double> profile;   // 2*window+1 mean similarities, index i = offset i-window
  std::vector<int> pair_counts;  // valid pairs per candidate (0 = excluded)
  bool boundary_hit = false;     // argmax sits at +-window
};

// Means cos(v_t, a_{t+o}) over valid overlapping pairs for each candidate
// offset o in [-window, window] and returns the argmax. Zero-norm pairs are
// skipped; candidates with no valid pair are excluded (NaN in the profile).
// Ties prefer the smallest |o|, then the negative one. Throws if every
// candidate is excluded.
OffsetResult determine_offset(const FeatureStream& visual, const FeatureStream& audio,
                              int window = 15);

// Fraction of |predicted - ground truth| <= tolerance.
double offset_accuracy(const std::vector<int>& predicted, const std::vector<int>& ground_truth,
                       int tolerance = 1);

struct AsdScores {
  std::vector<double> scores;
  int zero_norm_count = 0;  // frames scored 0 because a vector had no norm
};

// Per-frame zero-offset cosine similarity followed by a centered moving
// average of width `smoothing` (window [t-(w-1)/2, t+w/2], truncated at the
// ends).
AsdScores asd_scores(const FeatureStream& visual, const FeatureStream& audio,
                     int smoothing = 15);

struct ScoredTrack {
  std::vector<double> scores;
  bool active = false;
};

struct ClassificationMetrics {
  double ap = 0.0;
  double auroc = 0.0;
  double eer = 0.0;
};

// Track score = mean of its frame scores; higher means more likely active.
// AP sums (dR)*P over distinct-score groups in descending order; AUROC is
// the rank statistic with ties counting one half; EER linearly interpolates
// FAR/FRR between the adjacent thresholds where they cross. Throws unless
// both labels are present.
ClassificationMetrics classification_metrics(const std::vector<ScoredTrack>& tracks);

struct CurvePoint {
  double x = 0.0;  // roc: false positive rate, pr: recall
  double y = 0.0;  // roc: true positive rate, pr: precision
};

std::vector<CurvePoint> roc_curve(const std::vector<ScoredTrack>& tracks);
std::vector<CurvePoint> pr_curve(const std::vector<ScoredTrack>& tracks);

// Toy visual front-end: per-lip-landmark displacement magnitudes between
// consecutive frames (T-1 feature rows of dimension lip count).
FeatureStream lip_motion_stream(const std::vector<LandmarkSet>& frames,
                                double frame_rate = 25.0, int lip_begin = kLipBegin,
                                int lip_end = kLipEnd);

// Synthetic counterpart stream: source shifted by `lag` frames (out-of-range
// rows are zero) with optional additive noise.
FeatureStream make_lagged_stream(const FeatureStream& src, int lag, double noise_sigma,
                                 std::uint64_t seed);

}  // namespace facepipe
