#include "facepipe/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace facepipe {

namespace {

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d drot_x(double a) {
  Eigen::Matrix3d m;
  m << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
  return m;
}

Eigen::Matrix3d drot_y(double a) {
  Eigen::Matrix3d m;
  m << -std::sin(a), 0, std::cos(a), 0, 0, 0, -std::cos(a), 0, -std::sin(a);
  return m;
}

Eigen::Matrix3d drot_z(double a) {
  Eigen::Matrix3d m;
  m << -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a), 0, 0, 0, 0;
  return m;
}

}  // namespace

Eigen::Matrix3d rotation_matrix(const Pose& pose) {
  return rot_z(pose.euler[2]) * rot_y(pose.euler[1]) * rot_x(pose.euler[0]);
}

std::array<Eigen::Matrix3d, 3> rotation_derivatives(const Pose& pose) {
  const Eigen::Matrix3d rx = rot_x(pose.euler[0]);
  const Eigen::Matrix3d ry = rot_y(pose.euler[1]);
  const Eigen::Matrix3d rz = rot_z(pose.euler[2]);
  return {rz * ry * drot_x(pose.euler[0]), rz * drot_y(pose.euler[1]) * rx,
          drot_z(pose.euler[2]) * ry * rx};
}

Eigen::VectorXd transform_vertices(const Eigen::VectorXd& shape, const Pose& pose) {
  if (shape.size() % 3 != 0)
    throw std::invalid_argument("transform_vertices: length not divisible by 3");
  const Eigen::Matrix3d r = rotation_matrix(pose);
  Eigen::VectorXd out(shape.size());
  for (Eigen::Index v = 0; v < shape.size() / 3; ++v)
    out.segment<3>(3 * v) = r * shape.segment<3>(3 * v) + pose.translation;
  return out;
}

Projected project_point(const Eigen::Vector3d& p, const Camera& cam) {
  Projected out;
  if (p.z() >= -kNearEpsilon) return out;  // at or behind the camera plane
  const double d = -p.z();
  out.u = cam.focal * p.x() / d + cam.principal.x();
  out.v = cam.focal * (-p.y()) / d + cam.principal.y();
  out.depth = d;
  out.valid = true;
  return out;
}

std::vector<Projected> project_points(const Eigen::VectorXd& points, const Camera& cam) {
  if (points.size() % 3 != 0)
    throw std::invalid_argument("project_points: length not divisible by 3");
  std::vector<Projected> out(static_cast<size_t>(points.size() / 3));
  for (Eigen::Index v = 0; v < points.size() / 3; ++v)
    out[static_cast<size_t>(v)] = project_point(points.segment<3>(3 * v), cam);
  return out;
}

Eigen::VectorXd vertex_normals(const Eigen::VectorXd& shape,
                               const std::vector<std::array<std::uint32_t, 3>>& triangles) {
  if (shape.size() % 3 != 0)
    throw std::invalid_argument("vertex_normals: length not divisible by 3");
  const Eigen::Index v_count = shape.size() / 3;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(shape.size());
  for (const auto& t : triangles) {
    const Eigen::Vector3d p0 = shape.segment<3>(3 * t[0]);
    const Eigen::Vector3d p1 = shape.segment<3>(3 * t[1]);
    const Eigen::Vector3d p2 = shape.segment<3>(3 * t[2]);
    // Unnormalized cross product = 2*area times the face normal, so the
    // accumulation is area weighted and degenerate triangles drop out.
    const Eigen::Vector3d n = (p1 - p0).cross(p2 - p0);
    for (std::uint32_t idx : t) acc.segment<3>(3 * idx) += n;
  }
  for (Eigen::Index v = 0; v < v_count; ++v) {
    const double len = acc.segment<3>(3 * v).norm();
    if (len < 1e-30)
      acc.segment<3>(3 * v) = Eigen::Vector3d(0, 0, 1);
    else
      acc.segment<3>(3 * v) /= len;
  }
  return acc;
}

std::array<double, 9> sh_basis(const Eigen::Vector3d& n) {
  constexpr double c0 = 0.28209479177387814;
  constexpr double c1 = 0.48860251190291992;
  constexpr double c2 = 1.09254843059207907;
  constexpr double c3 = 0.31539156525252005;
  constexpr double c4 = 0.54627421529603953;
  const double x = n.x(), y = n.y(), z = n.z();
  return {c0,
          c1 * y,
          c1 * z,
          c1 * x,
          c2 * x * y,
          c2 * y * z,
          c3 * (3.0 * z * z - 1.0),
          c2 * x * z,
          c4 * (x * x - y * y)};
}

Eigen::VectorXd shade(const Eigen::VectorXd& texture, const Eigen::VectorXd& normals,
                      const Illumination& illum) {
  if (texture.size() != normals.size())
    throw std::invalid_argument("shade: texture/normal length mismatch");
  Eigen::VectorXd out(texture.size());
  for (Eigen::Index v = 0; v < texture.size() / 3; ++v) {
    const std::array<double, 9> phi = sh_basis(normals.segment<3>(3 * v));
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int b = 0; b < 9; ++b) s += illum.gamma[9 * c + b] * phi[static_cast<size_t>(b)];
      out[3 * v + c] = texture[3 * v + c] * s;
    }
  }
  return out;
}

}  // namespace facepipe
