#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

namespace facepipe {

// Rigid head pose: intrinsic Euler angles (pitch about x, yaw about y,
// roll about z, applied in that order, right handed) plus a translation
// in model units. The camera sits at the origin looking along -z.
struct Pose {
  Eigen::Vector3d euler = Eigen::Vector3d::Zero();        // pitch, yaw, roll (radians)
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // model units
};

// 27 spherical-harmonics lighting coefficients, channel-major:
// gamma[0..8] red, gamma[9..17] green, gamma[18..26] blue.
struct Illumination {
  Eigen::Matrix<double, 27, 1> gamma = Eigen::Matrix<double, 27, 1>::Zero();

  Eigen::Matrix<double, 9, 1> channel(int c) const { return gamma.segment<9>(9 * c); }
};

// Pinhole camera. Pixel (x, y) has center (x+0.5, y+0.5); the image y
// axis points down.
struct Camera {
  double focal = 1015.0;                              // pixels
  Eigen::Vector2d principal = {112.0, 112.0};         // pixels
  int width = 224;
  int height = 224;
};

struct Projected {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // camera-space depth, -z
  bool valid = false;  // false when the point is at or behind the camera plane
};

// R = Rz(roll) * Ry(yaw) * Rx(pitch); always a proper rotation.
Eigen::Matrix3d rotation_matrix(const Pose& pose);

// d/d(pitch), d/d(yaw), d/d(roll) of rotation_matrix at the given pose.
std::array<Eigen::Matrix3d, 3> rotation_derivatives(const Pose& pose);

// Applies v -> R v + t to every vertex of an interleaved 3V vector.
Eigen::VectorXd transform_vertices(const Eigen::VectorXd& shape, const Pose& pose);

// Perspective projection of one camera-space point:
//   u = f*x/(-z) + cx,  v = f*(-y)/(-z) + cy,  depth = -z.
// Points with z >= -kNearEpsilon are flagged invalid rather than thrown.
inline constexpr double kNearEpsilon = 1e-6;
Projected project_point(const Eigen::Vector3d& p, const Camera& cam);
std::vector<Projected> project_points(const Eigen::VectorXd& points, const Camera& cam);

// Area-weighted vertex normals of an interleaved 3V shape. Vertices with
// no incident (non-degenerate) triangle get (0,0,1).
Eigen::VectorXd vertex_normals(const Eigen::VectorXd& shape,
                               const std::vector<std::array<std::uint32_t, 3>>& triangles);

// The nine real spherical-harmonics basis polynomials of bands 0-2
// evaluated at a unit normal, in the order
//   1, y, z, x, xy, yz, 3z^2-1, xz, x^2-y^2
// with constants
//   c0 = 1/(2 sqrt(pi))        = 0.28209479177387814
//   c1 = sqrt(3)/(2 sqrt(pi))  = 0.48860251190291992
//   c2 = sqrt(15)/(2 sqrt(pi)) = 1.09254843059207907
//   c3 = sqrt(5)/(4 sqrt(pi))  = 0.31539156525252005
//   c4 = sqrt(15)/(4 sqrt(pi)) = 0.54627421529603953
std::array<double, 9> sh_basis(const Eigen::Vector3d& n);

inline constexpr double kShC0 = 0.28209479177387814;

// Per-vertex radiosity: each channel of the texture is scaled by the SH
// expansion of that channel's nine coefficients at the vertex normal.
Eigen::VectorXd shade(const Eigen::VectorXd& texture, const Eigen::VectorXd& normals,
                      const Illumination& illum);

}  // namespace facepipe
