#include "facepipe/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace facepipe {

namespace {

double edge_function(double au, double av, double bu, double bv, double pu, double pv) {
  return (bu - au) * (pv - av) - (bv - av) * (pu - au);
}

// Boundary ownership for counter-clockwise (on screen, y down) triangles:
// top edges run toward -u, left edges run toward +v.
bool top_left(double au, double av, double bu, double bv) {
  return (av == bv && bu < au) || (bv > av);
}

}  // namespace

RenderedImage rasterize(const std::vector<Projected>& points,
                        const std::vector<std::array<std::uint32_t, 3>>& triangles,
                        const Eigen::VectorXd& vertex_rgb, int width, int height) {
  if (vertex_rgb.size() != static_cast<Eigen::Index>(points.size()) * 3)
    throw std::invalid_argument("rasterize: attribute length mismatch");

  RenderedImage out;
  out.rgb = ImageRGB(width, height);
  out.depth = ImageGray(width, height, std::numeric_limits<double>::infinity());
  out.mask.assign(static_cast<size_t>(width) * height, 0);

  for (const auto& tri : triangles) {
    const Projected& p0 = points[tri[0]];
    const Projected& p1 = points[tri[1]];
    const Projected& p2 = points[tri[2]];
    if (!p0.valid || !p1.valid || !p2.valid) continue;

    const double area = edge_function(p0.u, p0.v, p1.u, p1.v, p2.u, p2.v);
    if (area >= 0.0) continue;  // back-facing or degenerate

    const int min_x = std::max(0, static_cast<int>(std::floor(std::min({p0.u, p1.u, p2.u}) - 0.5)));
    const int max_x =
        std::min(width - 1, static_cast<int>(std::ceil(std::max({p0.u, p1.u, p2.u}) - 0.5)));
    const int min_y = std::max(0, static_cast<int>(std::floor(std::min({p0.v, p1.v, p2.v}) - 0.5)));
    const int max_y =
        std::min(height - 1, static_cast<int>(std::ceil(std::max({p0.v, p1.v, p2.v}) - 0.5)));

    const double inv_w0 = 1.0 / p0.depth;
    const double inv_w1 = 1.0 / p1.depth;
    const double inv_w2 = 1.0 / p2.depth;
    const Eigen::Vector3d a0 = vertex_rgb.segment<3>(3 * tri[0]) * inv_w0;
    const Eigen::Vector3d a1 = vertex_rgb.segment<3>(3 * tri[1]) * inv_w1;
    const Eigen::Vector3d a2 = vertex_rgb.segment<3>(3 * tri[2]) * inv_w2;

    const bool tl0 = top_left(p1.u, p1.v, p2.u, p2.v);
    const bool tl1 = top_left(p2.u, p2.v, p0.u, p0.v);
    const bool tl2 = top_left(p0.u, p0.v, p1.u, p1.v);

    for (int y = min_y; y <= max_y; ++y) {
      const double py = y + 0.5;
      for (int x = min_x; x <= max_x; ++x) {
        const double px = x + 0.5;
        const double e0 = edge_function(p1.u, p1.v, p2.u, p2.v, px, py);
        const double e1 = edge_function(p2.u, p2.v, p0.u, p0.v, px, py);
        const double e2 = edge_function(p0.u, p0.v, p1.u, p1.v, px, py);
        // Interior is the negative side of every edge; boundary pixels go
        // to the triangle whose edge is top-left.
        if (!(e0 < 0.0 || (e0 == 0.0 && tl0))) continue;
        if (!(e1 < 0.0 || (e1 == 0.0 && tl1))) continue;
        if (!(e2 < 0.0 || (e2 == 0.0 && tl2))) continue;

        const double l0 = e0 / area;
        const double l1 = e1 / area;
        const double l2 = e2 / area;
        const double inv_w = l0 * inv_w0 + l1 * inv_w1 + l2 * inv_w2;
        const double depth = 1.0 / inv_w;
        if (!(depth < out.depth.at(x, y))) continue;  // ties keep the earlier triangle

        out.depth.at(x, y) = depth;
        out.mask[static_cast<size_t>(y) * width + x] = 1;
        for (int c = 0; c < 3; ++c) {
          const double num = l0 * a0[c] + l1 * a1[c] + l2 * a2[c];
          out.rgb.at(x, y, c) = std::clamp(num / inv_w, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

RenderedImage render(const MorphableBasis& basis, const CoefficientSet& coeffs,
                     const Camera& cam) {
  const Eigen::VectorXd shape = assemble_shape(basis, {coeffs.alpha, coeffs.beta});
  Eigen::VectorXd albedo = assemble_texture(basis, {coeffs.delta});
  // Albedo leaves the model unclamped; clamp here, at render time.
  albedo = albedo.cwiseMax(0.0).cwiseMin(1.0);
  const Eigen::VectorXd posed = transform_vertices(shape, coeffs.pose);
  // Normals come from posed geometry so shading follows head rotation.
  const Eigen::VectorXd normals = vertex_normals(posed, basis.triangles);
  const Eigen::VectorXd colors = shade(albedo, normals, coeffs.gamma);
  const std::vector<Projected> pts = project_points(posed, cam);
  return rasterize(pts, basis.triangles, colors, cam.width, cam.height);
}

Eigen::VectorXd pseudo_depth_texture(const Eigen::VectorXd& shape) {
  const Eigen::Index v_count = shape.size() / 3;
  double z_min = std::numeric_limits<double>::infinity();
  double z_max = -std::numeric_limits<double>::infinity();
  for (Eigen::Index v = 0; v < v_count; ++v) {
    z_min = std::min(z_min, shape[3 * v + 2]);
    z_max = std::max(z_max, shape[3 * v + 2]);
  }
  if (!(z_max > z_min))
    throw std::runtime_error("pseudo_depth_texture: shape has no z extent");
  const double range = z_max - z_min;
  Eigen::VectorXd out(v_count);
  for (Eigen::Index v = 0; v < v_count; ++v) out[v] = (shape[3 * v + 2] - z_min) / range;
  return out;
}

GrayRender render_pseudo_depth(const MorphableBasis& basis, const CoefficientSet& coeffs,
                               const Camera& cam) {
  const Eigen::VectorXd shape = assemble_shape(basis, {coeffs.alpha, coeffs.beta});
  const Eigen::VectorXd zs = pseudo_depth_texture(shape);
  Eigen::VectorXd gray(shape.size());
  for (Eigen::Index v = 0; v < zs.size(); ++v) gray.segment<3>(3 * v).setConstant(zs[v]);
  const Eigen::VectorXd posed = transform_vertices(shape, coeffs.pose);
  const std::vector<Projected> pts = project_points(posed, cam);
  RenderedImage img = rasterize(pts, basis.triangles, gray, cam.width, cam.height);
  GrayRender out;
  out.value = ImageGray(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) out.value.at(x, y) = img.rgb.at(x, y, 0);
  out.mask = std::move(img.mask);
  return out;
}

}  // namespace facepipe
