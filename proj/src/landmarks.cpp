#include "facepipe/landmarks.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace facepipe {

LandmarkSet LandmarkSet::all_valid(Eigen::Matrix<double, Eigen::Dynamic, 2> pts) {
  LandmarkSet s;
  s.valid.assign(static_cast<size_t>(pts.rows()), 1);
  s.points = std::move(pts);
  return s;
}

LandmarkWeights standard_weights(int n, double lip_weight, int lip_begin, int lip_end) {
  LandmarkWeights w;
  w.w = Eigen::VectorXd::Ones(n);
  for (int i = lip_begin; i < std::min(lip_end, n); ++i) w.w[i] = lip_weight;
  return w;
}

LandmarkWeights lip_only_weights(int n, int lip_begin, int lip_end) {
  LandmarkWeights w;
  w.w = Eigen::VectorXd::Zero(n);
  for (int i = lip_begin; i < std::min(lip_end, n); ++i) w.w[i] = 1.0;
  return w;
}

LandmarkSet reproject_landmarks(const MorphableBasis& basis, const CoefficientSet& coeffs,
                                const Camera& cam) {
  const Eigen::VectorXd shape = assemble_shape(basis, {coeffs.alpha, coeffs.beta});
  const Eigen::Matrix3d r = rotation_matrix(coeffs.pose);
  const Eigen::Index n = static_cast<Eigen::Index>(basis.landmark_indices.size());
  LandmarkSet out;
  out.points.resize(n, 2);
  out.valid.assign(static_cast<size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint32_t v = basis.landmark_indices[static_cast<size_t>(i)];
    const Eigen::Vector3d p = r * shape.segment<3>(3 * v) + coeffs.pose.translation;
    const Projected proj = project_point(p, cam);
    out.points(i, 0) = proj.u;
    out.points(i, 1) = proj.v;
    out.valid[static_cast<size_t>(i)] = proj.valid ? 1 : 0;
  }
  return out;
}

double lmd(const LandmarkSet& a, const LandmarkSet& b, const LandmarkWeights& w,
           double invalid_penalty) {
  const Eigen::Index n = a.size();
  if (b.size() != n || w.w.size() != n)
    throw std::invalid_argument("lmd: landmark count mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d;
    if (!a.valid[static_cast<size_t>(i)] || !b.valid[static_cast<size_t>(i)])
      d = invalid_penalty;
    else
      d = (a.points.row(i) - b.points.row(i)).norm();
    sum += w.w[i] * d;
  }
  return sum / static_cast<double>(n);
}

double collection_lmd(const std::vector<double>& datum_lmds) {
  if (datum_lmds.empty()) throw std::invalid_argument("collection_lmd: empty collection");
  double sum = 0.0;
  for (double v : datum_lmds) sum += v;
  return sum / static_cast<double>(datum_lmds.size());
}

double group_lmd(const std::vector<std::vector<double>>& collections) {
  if (collections.empty()) throw std::invalid_argument("group_lmd: empty group");
  double sum = 0.0;
  for (const auto& c : collections) sum += collection_lmd(c);
  return sum / static_cast<double>(collections.size());
}

GroupLmdStats group_lmd_stats(const std::vector<std::vector<std::vector<double>>>& groups) {
  if (groups.empty()) throw std::invalid_argument("group_lmd_stats: no groups");
  GroupLmdStats stats;
  stats.min = std::numeric_limits<double>::infinity();
  stats.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& g : groups) {
    double v = group_lmd(g);
    stats.per_group.push_back(v);
    stats.min = std::min(stats.min, v);
    stats.max = std::max(stats.max, v);
    sum += v;
  }
  stats.avg = sum / static_cast<double>(groups.size());
  return stats;
}

void write_landmarks(const LandmarkSet& lms, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  char buf[80];
  for (Eigen::Index i = 0; i < lms.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", lms.points(i, 0), lms.points(i, 1));
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LandmarkSet read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<Eigen::Vector2d> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    double u, v;
    if (!(ls >> u >> v))
      throw std::runtime_error("landmarks: bad line " + std::to_string(lineno) + " in " +
                               path.string());
    pts.emplace_back(u, v);
  }
  Eigen::Matrix<double, Eigen::Dynamic, 2> m(static_cast<Eigen::Index>(pts.size()), 2);
  for (size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i];
  return LandmarkSet::all_valid(std::move(m));
}

}  // namespace facepipe
