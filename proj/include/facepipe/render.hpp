#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "facepipe/basis.hpp"
#include "facepipe/coefficients.hpp"
#include "facepipe/image.hpp"
#include "facepipe/scene.hpp"

namespace facepipe {

// Output of one rasterization pass. mask[i] is true exactly where depth
// is finite; rgb is clamped to [0,1]; empty pixels are black with +inf
// depth.
struct RenderedImage {
  ImageRGB rgb;
  ImageGray depth;             // camera-space depth, +inf where empty
  std::vector<std::uint8_t> mask;  // row-major H*W

  bool covered(int x, int y) const { return mask[static_cast<size_t>(y) * rgb.width + x] != 0; }
};

struct GrayRender {
  ImageGray value;
  std::vector<std::uint8_t> mask;
};

// Software rasterizer. The conventions below are normative; tests compare
// against them bit for bit.
//   - pixel (x, y) is sampled at its center (x+0.5, y+0.5); image y is down
//   - edge function E(a,b,p) = (b.u-a.u)*(p.v-a.v) - (b.v-a.v)*(p.u-a.u)
//   - a triangle is front-facing iff E(v0,v1,v2) < 0 (counter-clockwise on
//     screen); back-facing and degenerate triangles are culled, as is any
//     triangle with a vertex at or behind the camera plane (no clipping)
//   - a pixel center on the boundary belongs to the triangle iff the edge
//     it lies on is a "top" edge (horizontal, pointing -u) or a "left"
//     edge (pointing +v)
//   - attributes are interpolated perspective-correct through 1/depth
//   - the depth test is strict <, so the lowest triangle index wins ties;
//     triangles are processed in index order
RenderedImage rasterize(const std::vector<Projected>& points,
                        const std::vector<std::array<std::uint32_t, 3>>& triangles,
                        const Eigen::VectorXd& vertex_rgb, int width, int height);

// Full image formation: assemble shape and texture, shade, pose, project,
// rasterize.
RenderedImage render(const MorphableBasis& basis, const CoefficientSet& coeffs,
                     const Camera& cam);

// Per-vertex normalized z of the assembled (pre-pose) shape:
// (z - min z) / (max z - min z). Throws if the shape is z-flat.
Eigen::VectorXd pseudo_depth_texture(const Eigen::VectorXd& shape);

// Renders the normalized-z scalar through the same pipeline as a gray
// texture (no shading). Background pixels are 0 with mask false.
GrayRender render_pseudo_depth(const MorphableBasis& basis, const CoefficientSet& coeffs,
                               const Camera& cam);

}  // namespace facepipe
