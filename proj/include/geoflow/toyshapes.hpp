#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "geoflow/trimesh.hpp"

namespace geoflow {

// Pose of the toy template: a capped tube that can bend, twist and taper.
struct PoseParams {
  double bend = 0;   // radians, [-0.6, 0.6]; arc bend in the y-z plane
  double twist = 0;  // radians, [-0.5, 0.5]; rotation about the axis at the ends
  double taper = 1;  // [0.7, 1.3]; radial scale at the top end

  void validate() const;
};

struct UvRect {
  double u0 = 0, v0 = 0, u1 = 0, v1 = 0;
  bool contains(double u, double v) const { return u >= u0 && u <= u1 && v >= v0 && v <= v1; }
};

// Synthetic clothing detail: band-limited radial wrinkles, an optional loose
// outward flap, and tangential drift. Amplitudes are fractions of the tube
// radius.
struct DisplacementSpec {
  double wrinkle_amp = 0.08;
  int wrinkle_bands = 12;
  double flap_amp = 0;  // 0 disables
  UvRect flap_region{0.35, 0.25, 0.65, 0.55};
  double tangential_drift = 0.3;  // fraction of wrinkle_amp
  uint64_t seed = 0;

  void validate() const;
};

struct Resolution {
  int nu = 64;  // axial quads
  int nv = 32;  // circumferential quads
};

inline constexpr double kTubeRadius = 0.25;
inline constexpr double kTubeLength = 1.6;

// Analytic surface map of the posed tube at chart coordinates (u, v).
// u runs cap-center -> rim -> tube -> rim -> cap-center, v wraps around.
Vec3 template_point(const PoseParams& pose, double u, double v);
Vec3 template_canonical_point(double u, double v);

struct SurfaceFrame {
  Vec3 position, normal, tangent_u, tangent_v;
};
SurfaceFrame template_frame(const PoseParams& pose, double u, double v);

TriMesh make_template(const PoseParams& pose, const Resolution& res = {});
TriMesh make_target(const TriMesh& tmpl, const DisplacementSpec& spec);

// UV-rasterized surface positions: texel (i, j) holds the position at
// uv = ((j+0.5)/w, (i+0.5)/h); texels not covered by any uv triangle are
// masked invalid.
struct VertexMap {
  int h = 0, w = 0;
  std::vector<Vec3> pos;       // row-major, h*w
  std::vector<uint8_t> valid;  // h*w

  const Vec3& at(int i, int j) const { return pos[size_t(i) * w + j]; }
};
VertexMap render_vertex_map(const TriMesh& tmpl, int h, int w);

struct ToyShape {
  PoseParams pose;
  DisplacementSpec spec;
  TriMesh template_mesh;
  TriMesh target_mesh;
};

struct DatasetConfig {
  int n_shapes = 8;
  PoseParams pose_lo{-0.5, -0.4, 0.8};
  PoseParams pose_hi{0.5, 0.4, 1.2};
  double wrinkle_amp_lo = 0.05, wrinkle_amp_hi = 0.12;
  int wrinkle_bands = 12;
  double flap_amp_lo = 0, flap_amp_hi = 0;  // set >0 for loose-clothing sets
  double tangential_drift = 0.3;
  Resolution resolution{};
  uint64_t seed = 0;
};

struct ToyDataset {
  DatasetConfig config;
  std::vector<ToyShape> shapes;
};

ToyDataset make_dataset(const DatasetConfig& config);

// Directory layout: shapes/{k}_template.obj, shapes/{k}_target.obj,
// manifest.toml. Loading regenerates the meshes from the manifest so
// canonical coordinates and seeds are reproduced bit-exactly.
void write_dataset(const ToyDataset& dataset, const std::string& dir);
ToyDataset load_dataset(const std::string& dir);

}  // namespace geoflow
