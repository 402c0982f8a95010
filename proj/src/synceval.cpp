#include "facepipe/synceval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "facepipe/rng.hpp"

namespace facepipe {

void write_feature_stream(const FeatureStream& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%lld %lld %.17g\n", static_cast<long long>(s.frames.rows()),
                static_cast<long long>(s.frames.cols()), s.frame_rate);
  out << buf;
  for (Eigen::Index t = 0; t < s.frames.rows(); ++t) {
    for (Eigen::Index d = 0; d < s.frames.cols(); ++d) {
      std::snprintf(buf, sizeof(buf), d ? " %.17g" : "%.17g", s.frames(t, d));
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

FeatureStream read_feature_stream(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  long long t = 0, d = 0;
  double rate = 0.0;
  if (!(in >> t >> d >> rate) || t < 1 || d < 1 || rate <= 0.0)
    throw std::runtime_error("feature stream: bad header in " + path.string());
  FeatureStream s;
  s.frame_rate = rate;
  s.frames.resize(t, d);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (!(in >> s.frames(i, j)))
        throw std::runtime_error("feature stream: truncated data in " + path.string());
  if (!s.frames.allFinite())
    throw std::runtime_error("feature stream: non-finite values in " + path.string());
  return s;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: dim mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine_similarity: zero-norm vector");
  return a.dot(b) / (na * nb);
}

OffsetResult determine_offset(const FeatureStream& visual, const FeatureStream& audio,
                              int window) {
  if (window < 1) throw std::invalid_argument("determine_offset: window must be >= 1");
  if (visual.frames.cols() != audio.frames.cols())
    throw std::invalid_argument("determine_offset: feature dim mismatch");
  const int tv = static_cast<int>(visual.frames.rows());
  const int ta = static_cast<int>(audio.frames.rows());

  OffsetResult res;
  res.profile.assign(static_cast<size_t>(2 * window + 1),
                     std::numeric_limits<double>::quiet_NaN());
  res.pair_counts.assign(static_cast<size_t>(2 * window + 1), 0);

  bool any = false;
  double best = -std::numeric_limits<double>::infinity();
  for (int o = -window; o <= window; ++o) {
    const int t_begin = std::max(0, -o);
    const int t_end = std::min(tv, ta - o);
    double sum = 0.0;
    int count = 0;
    for (int t = t_begin; t < t_end; ++t) {
      const Eigen::VectorXd v = visual.frames.row(t).transpose();
      const Eigen::VectorXd a = audio.frames.row(t + o).transpose();
      const double nv = v.norm();
      const double na = a.norm();
      if (nv == 0.0 || na == 0.0) continue;  // silent frame, no evidence
      sum += v.dot(a) / (nv * na);
      ++count;
    }
    const size_t idx = static_cast<size_t>(o + window);
    res.pair_counts[idx] = count;
    if (count == 0) continue;
    const double mean = sum / count;
    res.profile[idx] = mean;
    const bool better =
        !any || mean > best ||
        (mean == best && (std::abs(o) < std::abs(res.offset) ||
                          (std::abs(o) == std::abs(res.offset) && o < res.offset)));
    if (better) {
      best = mean;
      res.offset = o;
      any = true;
    }
  }
  if (!any)
    throw std::runtime_error("determine_offset: no overlapping pairs at any offset");
  res.boundary_hit = std::abs(res.offset) == window;
  return res;
}

double offset_accuracy(const std::vector<int>& predicted, const std::vector<int>& ground_truth,
                       int tolerance) {
  if (predicted.size() != ground_truth.size())
    throw std::invalid_argument("offset_accuracy: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("offset_accuracy: empty input");
  int correct = 0;
  for (size_t i = 0; i < predicted.size(); ++i)
    if (std::abs(predicted[i] - ground_truth[i]) <= tolerance) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

AsdScores asd_scores(const FeatureStream& visual, const FeatureStream& audio, int smoothing) {
  if (smoothing < 1) throw std::invalid_argument("asd_scores: smoothing must be >= 1");
  if (visual.frames.cols() != audio.frames.cols())
    throw std::invalid_argument("asd_scores: feature dim mismatch");
  const int t_len =
      static_cast<int>(std::min(visual.frames.rows(), audio.frames.rows()));
  if (t_len < 1) throw std::invalid_argument("asd_scores: empty streams");

  AsdScores out;
  std::vector<double> raw(static_cast<size_t>(t_len));
  for (int t = 0; t < t_len; ++t) {
    const Eigen::VectorXd v = visual.frames.row(t).transpose();
    const Eigen::VectorXd a = audio.frames.row(t).transpose();
    const double nv = v.norm();
    const double na = a.norm();
    if (nv == 0.0 || na == 0.0) {
      raw[static_cast<size_t>(t)] = 0.0;
      ++out.zero_norm_count;
    } else {
      raw[static_cast<size_t>(t)] = v.dot(a) / (nv * na);
    }
  }

  const int back = (smoothing - 1) / 2;
  const int fwd = smoothing / 2;
  out.scores.resize(static_cast<size_t>(t_len));
  for (int t = 0; t < t_len; ++t) {
    const int lo = std::max(0, t - back);
    const int hi = std::min(t_len - 1, t + fwd);
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) sum += raw[static_cast<size_t>(i)];
    out.scores[static_cast<size_t>(t)] = sum / (hi - lo + 1);
  }
  return out;
}

namespace {

struct ScoreGroup {
  double score;
  int active;
  int inactive;
};

// Distinct track scores in descending order with per-group label counts.
std::vector<ScoreGroup> score_groups(const std::vector<ScoredTrack>& tracks, int* n_active,
                                     int* n_inactive) {
  std::map<double, std::pair<int, int>> by_score;
  *n_active = 0;
  *n_inactive = 0;
  for (const auto& tr : tracks) {
    if (tr.scores.empty()) throw std::invalid_argument("classification_metrics: empty track");
    double sum = 0.0;
    for (double s : tr.scores) sum += s;
    const double score = sum / static_cast<double>(tr.scores.size());
    auto& counts = by_score[score];
    if (tr.active) {
      ++counts.first;
      ++*n_active;
    } else {
      ++counts.second;
      ++*n_inactive;
    }
  }
  if (*n_active == 0 || *n_inactive == 0)
    throw std::invalid_argument("classification_metrics: need both labels");
  std::vector<ScoreGroup> groups;
  for (auto it = by_score.rbegin(); it != by_score.rend(); ++it)
    groups.push_back({it->first, it->second.first, it->second.second});
  return groups;
}

}  // namespace

ClassificationMetrics classification_metrics(const std::vector<ScoredTrack>& tracks) {
  int n_act = 0, n_inact = 0;
  const std::vector<ScoreGroup> groups = score_groups(tracks, &n_act, &n_inact);

  ClassificationMetrics out;

  // AP over distinct-score groups (ties enter as one block).
  {
    int cum_act = 0, cum_tot = 0;
    double prev_recall = 0.0;
    for (const auto& g : groups) {
      cum_act += g.active;
      cum_tot += g.active + g.inactive;
      if (g.active > 0) {
        const double recall = static_cast<double>(cum_act) / n_act;
        const double precision = static_cast<double>(cum_act) / cum_tot;
        out.ap += (recall - prev_recall) * precision;
        prev_recall = recall;
      }
    }
  }

  // AUROC as the rank statistic, ties worth one half.
  {
    double pairs = 0.0;
    int inactive_below = n_inact;
    for (const auto& g : groups) {
      inactive_below -= g.inactive;
      pairs += g.active * (inactive_below + 0.5 * g.inactive);
    }
    out.auroc = pairs / (static_cast<double>(n_act) * n_inact);
  }

  // EER: classify active at score >= threshold; FAR rises and FRR falls as
  // the threshold sweeps down; interpolate linearly across the crossing.
  {
    double prev_far = 0.0, prev_frr = 1.0;  // threshold above every score
    int cum_act = 0, cum_inact = 0;
    out.eer = prev_far;  // perfect-separation default overwritten below
    bool found = false;
    for (size_t i = 0; i <= groups.size(); ++i) {
      double far, frr;
      if (i < groups.size()) {
        cum_act += groups[i].active;
        cum_inact += groups[i].inactive;
        far = static_cast<double>(cum_inact) / n_inact;
        frr = static_cast<double>(n_act - cum_act) / n_act;
      } else {
        far = 1.0;  // threshold below every score
        frr = 0.0;
      }
      if (far >= frr) {
        const double d_prev = prev_far - prev_frr;
        const double d_now = far - frr;
        if (d_now == d_prev) {
          out.eer = far;
        } else {
          const double t = (0.0 - d_prev) / (d_now - d_prev);
          out.eer = prev_far + t * (far - prev_far);
        }
        found = true;
        break;
      }
      prev_far = far;
      prev_frr = frr;
    }
    if (!found) out.eer = 1.0;  // unreachable: far ends at 1, frr at 0
  }

  return out;
}

std::vector<CurvePoint> roc_curve(const std::vector<ScoredTrack>& tracks) {
  int n_act = 0, n_inact = 0;
  const std::vector<ScoreGroup> groups = score_groups(tracks, &n_act, &n_inact);
  std::vector<CurvePoint> out;
  out.push_back({0.0, 0.0});
  int cum_act = 0, cum_inact = 0;
  for (const auto& g : groups) {
    cum_act += g.active;
    cum_inact += g.inactive;
    out.push_back({static_cast<double>(cum_inact) / n_inact,
                   static_cast<double>(cum_act) / n_act});
  }
  return out;
}

std::vector<CurvePoint> pr_curve(const std::vector<ScoredTrack>& tracks) {
  int n_act = 0, n_inact = 0;
  const std::vector<ScoreGroup> groups = score_groups(tracks, &n_act, &n_inact);
  std::vector<CurvePoint> out;
  int cum_act = 0, cum_tot = 0;
  for (const auto& g : groups) {
    cum_act += g.active;
    cum_tot += g.active + g.inactive;
    out.push_back({static_cast<double>(cum_act) / n_act,
                   static_cast<double>(cum_act) / cum_tot});
  }
  return out;
}

FeatureStream lip_motion_stream(const std::vector<LandmarkSet>& frames, double frame_rate,
                                int lip_begin, int lip_end) {
  if (frames.size() < 2)
    throw std::invalid_argument("lip_motion_stream: need at least two frames");
  const int d = lip_end - lip_begin;
  for (const auto& f : frames)
    if (f.size() < lip_end)
      throw std::invalid_argument("lip_motion_stream: missing lip landmarks");
  FeatureStream s;
  s.frame_rate = frame_rate;
  s.frames.resize(static_cast<Eigen::Index>(frames.size() - 1), d);
  for (size_t t = 0; t + 1 < frames.size(); ++t)
    for (int k = 0; k < d; ++k)
      s.frames(static_cast<Eigen::Index>(t), k) =
          (frames[t + 1].points.row(lip_begin + k) - frames[t].points.row(lip_begin + k))
              .norm();
  return s;
}

FeatureStream make_lagged_stream(const FeatureStream& src, int lag, double noise_sigma,
                                 std::uint64_t seed) {
  Rng rng(seed);
  FeatureStream out;
  out.frame_rate = src.frame_rate;
  out.frames = Eigen::MatrixXd::Zero(src.frames.rows(), src.frames.cols());
  for (Eigen::Index t = 0; t < src.frames.rows(); ++t) {
    const Eigen::Index from = t + lag;
    if (from >= 0 && from < src.frames.rows()) out.frames.row(t) = src.frames.row(from);
    if (noise_sigma > 0.0)
      for (Eigen::Index d = 0; d < src.frames.cols(); ++d)
        out.frames(t, d) += noise_sigma * rng.normal();
  }
  return out;
}

}  // namespace facepipe
