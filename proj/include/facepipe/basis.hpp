#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace facepipe {

// Linear morphable face model: a face shape is the mean plus weighted
// identity and expression modes, a face texture is the mean albedo plus
// weighted texture modes. Shape and texture vectors are length 3*V with
// x,y,z (resp. r,g,b) interleaved per vertex.
struct MorphableBasis {
  Eigen::VectorXd mean_shape;    // 3V, model units
  Eigen::VectorXd mean_texture;  // 3V, albedo rgb in [0,1]
  Eigen::MatrixXd basis_id;      // 3V x D_id
  Eigen::MatrixXd basis_exp;     // 3V x D_exp
  Eigen::MatrixXd basis_tex;     // 3V x D_tex
  std::vector<std::array<std::uint32_t, 3>> triangles;  // ccw seen from outside
  std::vector<std::uint32_t> landmark_indices;          // landmark n -> vertex

  int vertex_count() const { return static_cast<int>(mean_shape.size() / 3); }
  int dim_id() const { return static_cast<int>(basis_id.cols()); }
  int dim_exp() const { return static_cast<int>(basis_exp.cols()); }
  int dim_tex() const { return static_cast<int>(basis_tex.cols()); }

  // Throws std::runtime_error on any structural invariant violation.
  void validate() const;
};

struct ShapeCoeffs {
  Eigen::VectorXd alpha;  // identity, D_id
  Eigen::VectorXd beta;   // expression, D_exp
};

struct TextureCoeffs {
  Eigen::VectorXd delta;  // texture, D_tex
};

// mean_shape + basis_id*alpha + basis_exp*beta. Throws on dim mismatch.
Eigen::VectorXd assemble_shape(const MorphableBasis& basis, const ShapeCoeffs& c);

// mean_texture + basis_tex*delta, unclamped (render clamps). Throws on
// dim mismatch.
Eigen::VectorXd assemble_texture(const MorphableBasis& basis, const TextureCoeffs& c);

// MBF container, little endian throughout:
//   magic   8 bytes  "MBF1\0\0\0\0"
//   u32     V, D_id, D_exp, D_tex, triangle count, landmark count
//   f32     mean_shape[3V], mean_texture[3V]
//   f32     basis_id[3V*D_id], basis_exp[..], basis_tex[..]  (one column
//           after another, each column 3V floats)
//   u32     triangles[3*count], landmark_indices[count]
// All in-memory values produced by this artifact are f32-exact, so
// save followed by load reproduces the basis bit for bit.
void save_basis(const MorphableBasis& basis, const std::filesystem::path& path);
MorphableBasis load_basis(const std::filesystem::path& path);

struct BasisDims {
  int id = 80;
  int exp = 64;
  int tex = 80;
};

// Deterministic face-like test basis: an open ellipsoid shell (flat apex
// plateau, curved cap, flat border skirt) with smooth truncated-Gaussian
// deformation modes. Expression modes live in the mouth band of the lower
// third and vanish identically on the apex plateau and the skirt, so
// expression-only morphs never move the silhouette or the depth extremes.
// 68 landmarks; indices 48..67 are the lip subset.
MorphableBasis generate_synthetic_basis(std::uint64_t seed, int v_target,
                                        const BasisDims& dims = {});

// Vertices moved by expression mode k (exactly, truncation makes the
// modes compactly supported).
std::vector<std::uint32_t> expression_support(const MorphableBasis& basis, int k,
                                              double tol = 1e-12);

// First/last+1 landmark slots conventionally holding the lips.
inline constexpr int kLipBegin = 48;
inline constexpr int kLipEnd = 68;

}  // namespace facepipe
