#include "facepipe/basis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "facepipe/rng.hpp"

namespace facepipe {

namespace {

constexpr char kMagic[8] = {'M', 'B', 'F', '1', '\0', '\0', '\0', '\0'};

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

// --- little-endian primitives ---------------------------------------------

void put_u32(std::string& buf, std::uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& buf, float v) { put_u32(buf, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  Reader(const unsigned char* data, size_t size) : data_(data), size_(size) {}

  std::uint32_t u32() {
    require(pos_ + 4 <= size_, "mbf: truncated file");
    std::uint32_t v = static_cast<std::uint32_t>(data_[pos_]) |
                      (static_cast<std::uint32_t>(data_[pos_ + 1]) << 8) |
                      (static_cast<std::uint32_t>(data_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(data_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  size_t remaining() const { return size_ - pos_; }

 private:
  const unsigned char* data_;
  size_t size_;
  size_t pos_ = 0;
};

void append_vector(std::string& buf, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f32(buf, static_cast<float>(v[i]));
}

void append_matrix(std::string& buf, const Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) put_f32(buf, static_cast<float>(m(i, j)));
}

}  // namespace

void MorphableBasis::validate() const {
  const Eigen::Index n = mean_shape.size();
  require(n > 0 && n % 3 == 0, "basis: mean_shape length must be positive multiple of 3");
  require(mean_texture.size() == n, "basis: mean_texture length mismatch");
  require(basis_id.rows() == n && basis_exp.rows() == n && basis_tex.rows() == n,
          "basis: basis row count must equal 3*V");
  require(mean_shape.allFinite() && mean_texture.allFinite() && basis_id.allFinite() &&
              basis_exp.allFinite() && basis_tex.allFinite(),
          "basis: non-finite entries");
  require(mean_texture.minCoeff() >= 0.0 && mean_texture.maxCoeff() <= 1.0,
          "basis: mean_texture outside [0,1]");
  const auto v = static_cast<std::uint32_t>(n / 3);
  for (const auto& t : triangles)
    for (std::uint32_t idx : t) require(idx < v, "basis: triangle index out of range");
  for (std::uint32_t idx : landmark_indices)
    require(idx < v, "basis: landmark index out of range");
}

Eigen::VectorXd assemble_shape(const MorphableBasis& basis, const ShapeCoeffs& c) {
  require(c.alpha.size() == basis.basis_id.cols(), "assemble_shape: alpha dim mismatch");
  require(c.beta.size() == basis.basis_exp.cols(), "assemble_shape: beta dim mismatch");
  return basis.mean_shape + basis.basis_id * c.alpha + basis.basis_exp * c.beta;
}

Eigen::VectorXd assemble_texture(const MorphableBasis& basis, const TextureCoeffs& c) {
  require(c.delta.size() == basis.basis_tex.cols(), "assemble_texture: delta dim mismatch");
  return basis.mean_texture + basis.basis_tex * c.delta;
}

void save_basis(const MorphableBasis& basis, const std::filesystem::path& path) {
  basis.validate();
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_u32(buf, static_cast<std::uint32_t>(basis.vertex_count()));
  put_u32(buf, static_cast<std::uint32_t>(basis.dim_id()));
  put_u32(buf, static_cast<std::uint32_t>(basis.dim_exp()));
  put_u32(buf, static_cast<std::uint32_t>(basis.dim_tex()));
  put_u32(buf, static_cast<std::uint32_t>(basis.triangles.size()));
  put_u32(buf, static_cast<std::uint32_t>(basis.landmark_indices.size()));
  append_vector(buf, basis.mean_shape);
  append_vector(buf, basis.mean_texture);
  append_matrix(buf, basis.basis_id);
  append_matrix(buf, basis.basis_exp);
  append_matrix(buf, basis.basis_tex);
  for (const auto& t : basis.triangles)
    for (std::uint32_t idx : t) put_u32(buf, idx);
  for (std::uint32_t idx : basis.landmark_indices) put_u32(buf, idx);

  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open for write: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(static_cast<bool>(out), "write failed: " + path.string());
}

MorphableBasis load_basis(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(bytes.size() >= sizeof(kMagic) + 6 * 4, "mbf: truncated file");
  require(std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0, "mbf: bad magic");

  Reader r(reinterpret_cast<const unsigned char*>(bytes.data()) + sizeof(kMagic),
           bytes.size() - sizeof(kMagic));
  const std::uint32_t v = r.u32();
  const std::uint32_t d_id = r.u32();
  const std::uint32_t d_exp = r.u32();
  const std::uint32_t d_tex = r.u32();
  const std::uint32_t n_tri = r.u32();
  const std::uint32_t n_lmk = r.u32();
  require(v > 0, "mbf: zero vertex count");

  const std::uint64_t n3 = 3ull * v;
  const std::uint64_t expected =
      4ull * (n3 * (2 + d_id + d_exp + d_tex) + 3ull * n_tri + n_lmk);
  require(r.remaining() == expected, "mbf: truncated or oversized payload");

  MorphableBasis b;
  b.mean_shape.resize(static_cast<Eigen::Index>(n3));
  b.mean_texture.resize(static_cast<Eigen::Index>(n3));
  b.basis_id.resize(static_cast<Eigen::Index>(n3), d_id);
  b.basis_exp.resize(static_cast<Eigen::Index>(n3), d_exp);
  b.basis_tex.resize(static_cast<Eigen::Index>(n3), d_tex);
  for (Eigen::Index i = 0; i < b.mean_shape.size(); ++i) b.mean_shape[i] = r.f32();
  for (Eigen::Index i = 0; i < b.mean_texture.size(); ++i) b.mean_texture[i] = r.f32();
  for (Eigen::Index j = 0; j < b.basis_id.cols(); ++j)
    for (Eigen::Index i = 0; i < b.basis_id.rows(); ++i) b.basis_id(i, j) = r.f32();
  for (Eigen::Index j = 0; j < b.basis_exp.cols(); ++j)
    for (Eigen::Index i = 0; i < b.basis_exp.rows(); ++i) b.basis_exp(i, j) = r.f32();
  for (Eigen::Index j = 0; j < b.basis_tex.cols(); ++j)
    for (Eigen::Index i = 0; i < b.basis_tex.rows(); ++i) b.basis_tex(i, j) = r.f32();
  b.triangles.resize(n_tri);
  for (auto& t : b.triangles)
    for (auto& idx : t) idx = r.u32();
  b.landmark_indices.resize(n_lmk);
  for (auto& idx : b.landmark_indices) idx = r.u32();

  b.validate();
  return b;
}

// --- synthetic basis generator ---------------------------------------------

namespace {

// Ellipsoid semi-axes; +y is up and +z points out of the face.
constexpr double kAxisX = 0.9;
constexpr double kAxisY = 1.2;
constexpr double kAxisZ = 0.75;
constexpr double kThetaMax = 1.7453292519943295;  // 100 deg from the +z pole
constexpr double kPlateauRadius = 0.08;           // fraction, flat apex disk
constexpr double kSkirtScale = 1.06;              // flat border band width

struct MeshLayout {
  int segments = 0;
  int rings = 0;  // curved rings, excluding plateau ring and skirt ring
  int apex_index = 0;
  int ring_start(int ring) const { return 1 + ring * segments; }  // ring 0 = plateau edge
  int skirt_ring() const { return rings + 1; }
  int vertex_count() const { return 1 + segments * (rings + 2); }
};

MeshLayout pick_layout(int v_target) {
  MeshLayout m;
  m.segments = std::max(6, static_cast<int>(std::ceil(std::sqrt(2.0 * v_target))));
  m.rings = std::max(
      2, static_cast<int>(std::ceil(static_cast<double>(v_target - 1) / m.segments)) - 2);
  return m;
}

// Truncated Gaussian bump profile, exactly zero at and beyond 3 sigma.
double bump_profile(double r, double sigma) {
  if (r >= 3.0 * sigma) return 0.0;
  return std::exp(-r * r / (2.0 * sigma * sigma)) - std::exp(-4.5);
}

Eigen::Vector3d vertex_pos(const Eigen::VectorXd& shape, int v) {
  return shape.segment<3>(3 * v);
}

std::vector<std::uint32_t> farthest_point_sample(const Eigen::VectorXd& shape,
                                                 const std::vector<std::uint32_t>& pool,
                                                 int count, Rng& rng) {
  std::vector<std::uint32_t> picked;
  if (pool.empty()) return picked;
  std::vector<double> dist(pool.size(), std::numeric_limits<double>::infinity());
  std::uint32_t current = pool[rng.below(static_cast<int>(pool.size()))];
  picked.push_back(current);
  while (static_cast<int>(picked.size()) < count) {
    if (picked.size() >= pool.size()) {
      // Tiny meshes - cycle the pool rather than fail.
      picked.push_back(picked[picked.size() % pool.size()]);
      continue;
    }
    double best = -1.0;
    std::uint32_t best_v = pool[0];
    for (size_t i = 0; i < pool.size(); ++i) {
      double d = (vertex_pos(shape, static_cast<int>(pool[i])) -
                  vertex_pos(shape, static_cast<int>(current)))
                     .norm();
      dist[i] = std::min(dist[i], d);
      if (dist[i] > best) {
        best = dist[i];
        best_v = pool[i];
      }
    }
    picked.push_back(best_v);
    current = best_v;
  }
  return picked;
}

// Sum-of-bumps deformation column over the mean shape; displacement of
// vertex v is sum_b dir_b * profile(|x_v - c_b|, sigma_b).
Eigen::VectorXd make_mode(const Eigen::VectorXd& shape,
                          const std::vector<std::uint32_t>& center_pool, int n_bumps,
                          double sigma_lo, double sigma_hi, bool y_dominant, Rng& rng) {
  const int v_count = static_cast<int>(shape.size() / 3);
  Eigen::VectorXd col = Eigen::VectorXd::Zero(shape.size());
  for (int b = 0; b < n_bumps; ++b) {
    Eigen::Vector3d center =
        vertex_pos(shape, static_cast<int>(center_pool[rng.below(static_cast<int>(center_pool.size()))]));
    double sigma = rng.uniform(sigma_lo, sigma_hi);
    Eigen::Vector3d dir;
    if (y_dominant) {
      // Mouth-like motion: mostly vertical, limited depth component.
      double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
      dir = Eigen::Vector3d(0.3 * rng.uniform(-1.0, 1.0), sign, 0.3 * rng.uniform(-1.0, 1.0));
    } else {
      do {
        dir = Eigen::Vector3d(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                              rng.uniform(-1.0, 1.0));
      } while (dir.norm() < 1e-3);
    }
    dir.normalize();
    for (int v = 0; v < v_count; ++v) {
      double g = bump_profile((vertex_pos(shape, v) - center).norm(), sigma);
      if (g > 0.0) col.segment<3>(3 * v) += dir * g;
    }
  }
  return col;
}

double max_vertex_norm(const Eigen::VectorXd& col) {
  double m = 0.0;
  for (Eigen::Index v = 0; v < col.size() / 3; ++v)
    m = std::max(m, col.segment<3>(3 * v).norm());
  return m;
}

void quantize_f32(Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(v[i]));
}

void quantize_f32(Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<double>(static_cast<float>(m(i, j)));
}

}  // namespace

MorphableBasis generate_synthetic_basis(std::uint64_t seed, int v_target,
                                        const BasisDims& dims) {
  require(v_target >= 16, "generate_synthetic_basis: v_target must be >= 16");
  require(dims.id > 0 && dims.exp > 0 && dims.tex > 0,
          "generate_synthetic_basis: dims must be positive");

  const MeshLayout mesh = pick_layout(v_target);
  const int v_count = mesh.vertex_count();
  const int s = mesh.segments;

  MorphableBasis b;
  b.mean_shape.resize(3 * v_count);

  // Apex plateau (flat disk at z = kAxisZ), curved cap, flat skirt. The two
  // flat bands pin the shape's z extremes on whole triangles, which the
  // pseudo-depth render relies on.
  b.mean_shape.segment<3>(3 * mesh.apex_index) = Eigen::Vector3d(0.0, 0.0, kAxisZ);
  const double theta0 = std::asin(kPlateauRadius);
  const double rim_z = kAxisZ * std::cos(kThetaMax);
  const double rim_r = std::sin(kThetaMax);
  for (int j = 0; j < s; ++j) {
    double phi = 2.0 * 3.14159265358979323846 * j / s;
    double cp = std::cos(phi), sp = std::sin(phi);
    b.mean_shape.segment<3>(3 * mesh.ring_start(0) + 3 * j) =
        Eigen::Vector3d(kAxisX * kPlateauRadius * cp, kAxisY * kPlateauRadius * sp, kAxisZ);
    for (int i = 1; i <= mesh.rings; ++i) {
      double theta = theta0 + (kThetaMax - theta0) * i / mesh.rings;
      b.mean_shape.segment<3>(3 * mesh.ring_start(i) + 3 * j) =
          Eigen::Vector3d(kAxisX * std::sin(theta) * cp, kAxisY * std::sin(theta) * sp,
                          kAxisZ * std::cos(theta));
    }
    b.mean_shape.segment<3>(3 * mesh.ring_start(mesh.skirt_ring()) + 3 * j) =
        Eigen::Vector3d(kAxisX * kSkirtScale * rim_r * cp, kAxisY * kSkirtScale * rim_r * sp,
                        rim_z);
  }

  // Triangles, counter-clockwise seen from outside.
  for (int j = 0; j < s; ++j) {
    int jn = (j + 1) % s;
    b.triangles.push_back({static_cast<std::uint32_t>(mesh.apex_index),
                           static_cast<std::uint32_t>(mesh.ring_start(0) + j),
                           static_cast<std::uint32_t>(mesh.ring_start(0) + jn)});
  }
  for (int i = 0; i <= mesh.rings; ++i) {
    int a = mesh.ring_start(i);
    int c = mesh.ring_start(i + 1);
    for (int j = 0; j < s; ++j) {
      int jn = (j + 1) % s;
      b.triangles.push_back({static_cast<std::uint32_t>(a + j), static_cast<std::uint32_t>(c + j),
                             static_cast<std::uint32_t>(c + jn)});
      b.triangles.push_back({static_cast<std::uint32_t>(a + j), static_cast<std::uint32_t>(c + jn),
                             static_cast<std::uint32_t>(a + jn)});
    }
  }

  // Mouth band: lower-third front vertices, kept 3 sigma clear of both flat
  // bands so expression modes cannot disturb them.
  std::vector<std::uint32_t> mouth_band;
  std::vector<std::uint32_t> all_vertices(v_count);
  for (int v = 0; v < v_count; ++v) {
    all_vertices[v] = static_cast<std::uint32_t>(v);
    Eigen::Vector3d p = vertex_pos(b.mean_shape, v);
    if (p.y() >= -0.95 && p.y() <= -0.55 && p.z() > 0.30)
      mouth_band.push_back(static_cast<std::uint32_t>(v));
  }
  if (mouth_band.empty()) {
    // Coarse meshes: fall back to the lower-front quadrant.
    for (int v = 0; v < v_count; ++v) {
      Eigen::Vector3d p = vertex_pos(b.mean_shape, v);
      if (p.y() < -0.4 && p.z() > 0.0) mouth_band.push_back(static_cast<std::uint32_t>(v));
    }
  }
  if (mouth_band.empty()) mouth_band = all_vertices;

  // Vertices that must stay rigid under expression.
  std::vector<bool> rigid(v_count, false);
  rigid[mesh.apex_index] = true;
  for (int j = 0; j < s; ++j) {
    rigid[mesh.ring_start(0) + j] = true;
    rigid[mesh.ring_start(mesh.skirt_ring()) + j] = true;
  }

  Eigen::Vector3d lo(1e30, 1e30, 1e30), hi(-1e30, -1e30, -1e30);
  for (int v = 0; v < v_count; ++v) {
    lo = lo.cwiseMin(vertex_pos(b.mean_shape, v));
    hi = hi.cwiseMax(vertex_pos(b.mean_shape, v));
  }
  const double bbox_diag = (hi - lo).norm();
  const double shape_scale = 0.02 * bbox_diag;  // unit coefficient ~2% of bbox diagonal

  Rng rng_id(Rng::substream(seed, "basis_id"));
  Rng rng_exp(Rng::substream(seed, "basis_exp"));
  Rng rng_tex(Rng::substream(seed, "basis_tex"));
  Rng rng_lmk(Rng::substream(seed, "landmarks"));

  b.basis_id.resize(3 * v_count, dims.id);
  for (int k = 0; k < dims.id; ++k) {
    Eigen::VectorXd col = make_mode(b.mean_shape, all_vertices, 3, 0.30, 0.55, false, rng_id);
    b.basis_id.col(k) = col * (shape_scale / max_vertex_norm(col));
  }

  b.basis_exp.resize(3 * v_count, dims.exp);
  for (int k = 0; k < dims.exp; ++k) {
    Eigen::VectorXd col = make_mode(b.mean_shape, mouth_band, 2, 0.10, 0.15, true, rng_exp);
    for (int v = 0; v < v_count; ++v)
      if (rigid[v]) col.segment<3>(3 * v).setZero();
    b.basis_exp.col(k) = col * (shape_scale / max_vertex_norm(col));
  }

  // Skin-like smooth mean albedo, strictly inside [0,1].
  b.mean_texture.resize(3 * v_count);
  for (int v = 0; v < v_count; ++v) {
    Eigen::Vector3d p = vertex_pos(b.mean_shape, v);
    b.mean_texture[3 * v + 0] = 0.72 + 0.08 * std::sin(2.0 * p.y()) + 0.04 * std::sin(3.1 * p.x());
    b.mean_texture[3 * v + 1] = 0.52 + 0.06 * std::sin(2.3 * p.y() + 1.0);
    b.mean_texture[3 * v + 2] = 0.45 + 0.05 * std::sin(1.9 * p.x() + 2.0);
  }

  b.basis_tex.resize(3 * v_count, dims.tex);
  for (int k = 0; k < dims.tex; ++k) {
    // Spatial bump pattern tinted along one rgb direction per mode.
    Eigen::VectorXd spatial = make_mode(b.mean_shape, all_vertices, 3, 0.30, 0.55, false, rng_tex);
    Eigen::Vector3d rgb_dir;
    do {
      rgb_dir = Eigen::Vector3d(rng_tex.uniform(-1.0, 1.0), rng_tex.uniform(-1.0, 1.0),
                                rng_tex.uniform(-1.0, 1.0));
    } while (rgb_dir.norm() < 1e-3);
    rgb_dir.normalize();
    Eigen::VectorXd col(3 * v_count);
    for (int v = 0; v < v_count; ++v)
      col.segment<3>(3 * v) = rgb_dir * spatial.segment<3>(3 * v).norm();
    b.basis_tex.col(k) = col * (0.05 / max_vertex_norm(col));
  }

  // 48 spread landmarks plus 20 lip landmarks at slots 48..67.
  auto spread = farthest_point_sample(b.mean_shape, all_vertices, kLipBegin, rng_lmk);
  auto lips = farthest_point_sample(b.mean_shape, mouth_band, kLipEnd - kLipBegin, rng_lmk);
  b.landmark_indices.assign(spread.begin(), spread.end());
  b.landmark_indices.insert(b.landmark_indices.end(), lips.begin(), lips.end());

  // The container stores f32; quantize so save/load is bit-exact.
  quantize_f32(b.mean_shape);
  quantize_f32(b.mean_texture);
  quantize_f32(b.basis_id);
  quantize_f32(b.basis_exp);
  quantize_f32(b.basis_tex);

  b.validate();
  return b;
}

std::vector<std::uint32_t> expression_support(const MorphableBasis& basis, int k, double tol) {
  require(k >= 0 && k < basis.dim_exp(), "expression_support: column out of range");
  std::vector<std::uint32_t> out;
  for (int v = 0; v < basis.vertex_count(); ++v)
    if (basis.basis_exp.col(k).segment<3>(3 * v).norm() > tol)
      out.push_back(static_cast<std::uint32_t>(v));
  return out;
}

}  // namespace facepipe
