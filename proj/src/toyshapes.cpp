#include "geoflow/toyshapes.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "geoflow/errors.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/tomlmini.hpp"

namespace geoflow {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;
constexpr double kHalfLength = kTubeLength / 2;
// profile arc split: cap, side, cap
constexpr double kProfileLen = kTubeRadius + kTubeLength + kTubeRadius;
constexpr double kCapFrac = kTubeRadius / kProfileLen;

// Straight-tube profile: radius r(s) and axial coordinate a(s) for s in [0,1].
void profile(double s, double& r, double& a) {
  if (s <= kCapFrac) {
    r = kTubeRadius * (s / kCapFrac);
    a = -kHalfLength;
  } else if (s >= 1 - kCapFrac) {
    r = kTubeRadius * ((1 - s) / kCapFrac);
    a = kHalfLength;
  } else {
    r = kTubeRadius;
    a = -kHalfLength + kTubeLength * (s - kCapFrac) / (1 - 2 * kCapFrac);
  }
}

Vec3 apply_pose(const PoseParams& pose, const Vec3& p) {
  double x = p.x, y = p.y, z = p.z;
  // taper: radial scale from 1 at the bottom end to `taper` at the top
  double f = 1 + (pose.taper - 1) * (z + kHalfLength) / kTubeLength;
  x *= f;
  y *= f;
  // twist about the axis, +-twist at the ends
  double phi = pose.twist * z / kHalfLength;
  double cx = x * std::cos(phi) - y * std::sin(phi);
  double cy = x * std::sin(phi) + y * std::cos(phi);
  x = cx;
  y = cy;
  // circular-arc bend in the y-z plane, +-bend at the ends
  if (std::fabs(pose.bend) < 1e-12) return {x, y, z};
  double rb = kHalfLength / pose.bend;
  double alpha = z / rb;
  Vec3 centerline{0, rb * (1 - std::cos(alpha)), rb * std::sin(alpha)};
  Vec3 m{0, std::cos(alpha), -std::sin(alpha)};  // cross-section direction for local y
  return centerline + Vec3{x, 0, 0} + m * y;
}

}  // namespace

void PoseParams::validate() const {
  if (bend < -0.6 || bend > 0.6) throw UsageError("pose bend outside [-0.6, 0.6]");
  if (twist < -0.5 || twist > 0.5) throw UsageError("pose twist outside [-0.5, 0.5]");
  if (taper < 0.7 || taper > 1.3) throw UsageError("pose taper outside [0.7, 1.3]");
}

void DisplacementSpec::validate() const {
  if (wrinkle_amp < 0 || flap_amp < 0 || tangential_drift < 0)
    throw UsageError("displacement amplitudes must be >= 0");
  if (wrinkle_bands < 0) throw UsageError("wrinkle_bands must be >= 0");
  if (flap_region.u0 < 0 || flap_region.v0 < 0 || flap_region.u1 > 1 || flap_region.v1 > 1 ||
      flap_region.u0 > flap_region.u1 || flap_region.v0 > flap_region.v1)
    throw UsageError("flap_region must be a rectangle inside [0,1]^2");
}

Vec3 template_canonical_point(double u, double v) {
  double r, a;
  profile(u, r, a);
  double theta = kTau * v;
  return {r * std::cos(theta), r * std::sin(theta), a};
}

Vec3 template_point(const PoseParams& pose, double u, double v) {
  return apply_pose(pose, template_canonical_point(u, v));
}

SurfaceFrame template_frame(const PoseParams& pose, double u, double v) {
  // Finite differences of the analytic map; cap centers are degenerate in v,
  // so nudge u inward there.
  double su = std::min(std::max(u, 1e-4), 1.0 - 1e-4);
  const double h = 1e-5;
  SurfaceFrame f;
  f.position = template_point(pose, u, v);
  Vec3 du = (template_point(pose, su + h, v) - template_point(pose, su - h, v)) / (2 * h);
  Vec3 dv = (template_point(pose, su, v + h) - template_point(pose, su, v - h)) / (2 * h);
  f.tangent_u = normalize(du);
  f.tangent_v = normalize(dv);
  f.normal = normalize(cross(dv, du));  // outward
  return f;
}

TriMesh make_template(const PoseParams& pose, const Resolution& res) {
  pose.validate();
  if (res.nu < 8 || res.nv < 8) throw UsageError("make_template: resolution must be at least 8x8 quads");

  TriMesh mesh;
  int rows = res.nu + 1, cols = res.nv + 1;  // v seam duplicated at v=1
  mesh.vertices.reserve(size_t(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    double u = double(i) / res.nu;
    for (int j = 0; j < cols; ++j) {
      double v = double(j) / res.nv;
      SurfaceFrame f = template_frame(pose, u, v);
      mesh.vertices.push_back(f.position);
      mesh.vertex_normals.push_back(f.normal);
      mesh.vertex_uvs.push_back({u, v});
      mesh.vertex_canonical.push_back(template_canonical_point(u, v));
    }
  }
  auto vid = [cols](int i, int j) { return i * cols + j; };
  for (int i = 0; i < res.nu; ++i) {
    for (int j = 0; j < res.nv; ++j) {
      int a = vid(i, j), b = vid(i, j + 1), c = vid(i + 1, j + 1), d = vid(i + 1, j);
      mesh.faces.push_back({a, b, c});
      mesh.faces.push_back({a, c, d});
    }
  }
  // drop the degenerate triangles at the cap-center rings
  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.faces.size());
  for (size_t fidx = 0; fidx < mesh.faces.size(); ++fidx)
    if (mesh.triangle_area(int(fidx)) > 1e-14) kept.push_back(mesh.faces[fidx]);
  mesh.faces = std::move(kept);
  mesh.validate();
  return mesh;
}

namespace {

struct WrinkleBand {
  double freq_u, freq_v, phase, weight;
};

std::vector<WrinkleBand> draw_bands(int count, Rng& rng) {
  std::vector<WrinkleBand> bands(count);
  for (auto& b : bands) {
    b.freq_u = kTau * double(1 + rng.uniform_index(6));
    b.freq_v = kTau * double(1 + rng.uniform_index(6));
    b.phase = rng.uniform(0, kTau);
    b.weight = rng.uniform(0.5, 1.0);
  }
  return bands;
}

double eval_bands(const std::vector<WrinkleBand>& bands, double u, double v) {
  double sum = 0, wsum = 0;
  for (const auto& b : bands) {
    sum += b.weight * std::sin(b.freq_u * u + b.freq_v * v + b.phase);
    wsum += b.weight;
  }
  return wsum > 0 ? sum / wsum : 0;
}

double smootherstep(double t) {
  t = std::min(std::max(t, 0.0), 1.0);
  return t * t * t * (t * (t * 6 - 15) + 10);
}

// 1 at the rect center, 0 at the rect border, C2-smooth falloff.
double flap_profile(const UvRect& r, double u, double v) {
  if (!r.contains(u, v)) return 0;
  double tu = (u - r.u0) / std::max(r.u1 - r.u0, 1e-12);
  double tv = (v - r.v0) / std::max(r.v1 - r.v0, 1e-12);
  return smootherstep(1 - std::fabs(2 * tu - 1)) * smootherstep(1 - std::fabs(2 * tv - 1));
}

}  // namespace

TriMesh make_target(const TriMesh& tmpl, const DisplacementSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, /*stream=*/0x7d);
  auto radial_bands = draw_bands(spec.wrinkle_bands, rng);
  auto drift_u_bands = draw_bands(std::max(spec.wrinkle_bands / 2, 1), rng);
  auto drift_v_bands = draw_bands(std::max(spec.wrinkle_bands / 2, 1), rng);

  double wrinkle_abs = spec.wrinkle_amp * kTubeRadius;
  double flap_abs = spec.flap_amp * kTubeRadius;
  double drift_abs = spec.tangential_drift * wrinkle_abs;

  TriMesh out = tmpl;
  for (size_t i = 0; i < tmpl.vertices.size(); ++i) {
    double u = tmpl.vertex_uvs[i].u, v = tmpl.vertex_uvs[i].v;
    const Vec3& n = tmpl.vertex_normals[i];
    double radial = wrinkle_abs * eval_bands(radial_bands, u, v) + flap_abs * flap_profile(spec.flap_region, u, v);
    Vec3 d = n * radial;
    if (drift_abs > 0) {
      // tangent directions from the neighboring uv structure are not stored
      // on the mesh; derive them from the normal with a fixed frame choice
      Vec3 helper = std::fabs(n.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
      Vec3 t1 = normalize(cross(helper, n));
      Vec3 t2 = cross(n, t1);
      d += t1 * (drift_abs * eval_bands(drift_u_bands, u, v));
      d += t2 * (drift_abs * eval_bands(drift_v_bands, u, v));
    }
    out.vertices[i] = tmpl.vertices[i] + d;
  }

  // recompute vertex normals (area-weighted face normals)
  std::vector<Vec3> acc(out.vertices.size());
  for (const auto& f : out.faces) {
    Vec3 fn = cross(out.vertices[f[1]] - out.vertices[f[0]], out.vertices[f[2]] - out.vertices[f[0]]);
    acc[f[0]] += fn;
    acc[f[1]] += fn;
    acc[f[2]] += fn;
  }
  for (size_t i = 0; i < acc.size(); ++i) {
    double len = length(acc[i]);
    out.vertex_normals[i] = len > 1e-12 ? acc[i] / len : tmpl.vertex_normals[i];
  }
  out.validate();
  return out;
}

VertexMap render_vertex_map(const TriMesh& tmpl, int h, int w) {
  if (h < 1 || w < 1) throw UsageError("render_vertex_map: resolution must be >= 1");
  VertexMap map;
  map.h = h;
  map.w = w;
  map.pos.assign(size_t(h) * w, Vec3{});
  map.valid.assign(size_t(h) * w, 0);

  // uv-space triangle lookup via a coarse bin grid
  int bins = 16;
  std::vector<std::vector<int>> grid(size_t(bins) * bins);
  auto bin_of = [&](double u, double v) {
    int bu = std::min(std::max(int(u * bins), 0), bins - 1);
    int bv = std::min(std::max(int(v * bins), 0), bins - 1);
    return bv * bins + bu;
  };
  for (size_t f = 0; f < tmpl.faces.size(); ++f) {
    const auto& tri = tmpl.faces[f];
    double ulo = 1, uhi = 0, vlo = 1, vhi = 0;
    for (int k = 0; k < 3; ++k) {
      ulo = std::min(ulo, tmpl.vertex_uvs[tri[k]].u);
      uhi = std::max(uhi, tmpl.vertex_uvs[tri[k]].u);
      vlo = std::min(vlo, tmpl.vertex_uvs[tri[k]].v);
      vhi = std::max(vhi, tmpl.vertex_uvs[tri[k]].v);
    }
    int b0 = bin_of(ulo, vlo), b1 = bin_of(uhi, vhi);
    int bu0 = b0 % bins, bv0 = b0 / bins, bu1 = b1 % bins, bv1 = b1 / bins;
    for (int bv = bv0; bv <= bv1; ++bv)
      for (int bu = bu0; bu <= bu1; ++bu) grid[size_t(bv) * bins + bu].push_back(int(f));
  }

  const double eps = 1e-9;
  for (int i = 0; i < h; ++i) {
    double v = (i + 0.5) / h;
    for (int j = 0; j < w; ++j) {
      double u = (j + 0.5) / w;
      for (int f : grid[bin_of(u, v)]) {
        const auto& tri = tmpl.faces[f];
        const Vec2& p0 = tmpl.vertex_uvs[tri[0]];
        const Vec2& p1 = tmpl.vertex_uvs[tri[1]];
        const Vec2& p2 = tmpl.vertex_uvs[tri[2]];
        double det = (p1.u - p0.u) * (p2.v - p0.v) - (p2.u - p0.u) * (p1.v - p0.v);
        if (std::fabs(det) < 1e-15) continue;
        double b1 = ((u - p0.u) * (p2.v - p0.v) - (p2.u - p0.u) * (v - p0.v)) / det;
        double b2 = ((p1.u - p0.u) * (v - p0.v) - (u - p0.u) * (p1.v - p0.v)) / det;
        double b0 = 1 - b1 - b2;
        if (b0 < -eps || b1 < -eps || b2 < -eps) continue;
        map.pos[size_t(i) * w + j] = tmpl.vertices[tri[0]] * b0 + tmpl.vertices[tri[1]] * b1 +
                                     tmpl.vertices[tri[2]] * b2;
        map.valid[size_t(i) * w + j] = 1;
        break;
      }
    }
  }
  return map;
}

ToyDataset make_dataset(const DatasetConfig& config) {
  if (config.n_shapes < 1) throw UsageError("make_dataset: n_shapes must be >= 1");
  config.pose_lo.validate();
  config.pose_hi.validate();

  ToyDataset ds;
  ds.config = config;
  ds.shapes.reserve(config.n_shapes);
  for (int k = 0; k < config.n_shapes; ++k) {
    Rng rng(config.seed, /*stream=*/0x10, uint64_t(k));
    ToyShape shape;
    shape.pose.bend = rng.uniform(config.pose_lo.bend, config.pose_hi.bend);
    shape.pose.twist = rng.uniform(config.pose_lo.twist, config.pose_hi.twist);
    shape.pose.taper = rng.uniform(config.pose_lo.taper, config.pose_hi.taper);
    shape.spec.wrinkle_amp = rng.uniform(config.wrinkle_amp_lo, config.wrinkle_amp_hi);
    shape.spec.wrinkle_bands = config.wrinkle_bands;
    shape.spec.flap_amp = rng.uniform(config.flap_amp_lo, config.flap_amp_hi);
    shape.spec.tangential_drift = config.tangential_drift;
    shape.spec.seed = mix_seed(config.seed, 0x11, uint64_t(k));
    shape.template_mesh = make_template(shape.pose, config.resolution);
    shape.target_mesh = make_target(shape.template_mesh, shape.spec);
    ds.shapes.push_back(std::move(shape));
  }
  return ds;
}

void write_dataset(const ToyDataset& dataset, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "shapes");

  TomlDoc manifest;
  manifest.set_int("dataset.n_shapes", dataset.shapes.size());
  manifest.set_int("dataset.seed", int64_t(dataset.config.seed));
  manifest.set_int("dataset.resolution_u", dataset.config.resolution.nu);
  manifest.set_int("dataset.resolution_v", dataset.config.resolution.nv);
  for (size_t k = 0; k < dataset.shapes.size(); ++k) {
    const ToyShape& s = dataset.shapes[k];
    std::string sec = "shape" + std::to_string(k) + ".";
    manifest.set_double(sec + "bend", s.pose.bend);
    manifest.set_double(sec + "twist", s.pose.twist);
    manifest.set_double(sec + "taper", s.pose.taper);
    manifest.set_double(sec + "wrinkle_amp", s.spec.wrinkle_amp);
    manifest.set_int(sec + "wrinkle_bands", s.spec.wrinkle_bands);
    manifest.set_double(sec + "flap_amp", s.spec.flap_amp);
    manifest.set_double(sec + "flap_u0", s.spec.flap_region.u0);
    manifest.set_double(sec + "flap_v0", s.spec.flap_region.v0);
    manifest.set_double(sec + "flap_u1", s.spec.flap_region.u1);
    manifest.set_double(sec + "flap_v1", s.spec.flap_region.v1);
    manifest.set_double(sec + "tangential_drift", s.spec.tangential_drift);
    manifest.set_int(sec + "seed", int64_t(s.spec.seed));
    save_mesh(s.template_mesh, (fs::path(dir) / "shapes" / (std::to_string(k) + "_template.obj")).string());
    save_mesh(s.target_mesh, (fs::path(dir) / "shapes" / (std::to_string(k) + "_target.obj")).string());
  }
  manifest.save((fs::path(dir) / "manifest.toml").string());
}

ToyDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  TomlDoc manifest = TomlDoc::load((fs::path(dir) / "manifest.toml").string());

  ToyDataset ds;
  int n = int(manifest.get_int("dataset.n_shapes"));
  ds.config.n_shapes = n;
  ds.config.seed = uint64_t(manifest.get_int("dataset.seed"));
  ds.config.resolution.nu = int(manifest.get_int("dataset.resolution_u"));
  ds.config.resolution.nv = int(manifest.get_int("dataset.resolution_v"));
  for (int k = 0; k < n; ++k) {
    std::string sec = "shape" + std::to_string(k) + ".";
    ToyShape s;
    s.pose.bend = manifest.get_double(sec + "bend");
    s.pose.twist = manifest.get_double(sec + "twist");
    s.pose.taper = manifest.get_double(sec + "taper");
    s.spec.wrinkle_amp = manifest.get_double(sec + "wrinkle_amp");
    s.spec.wrinkle_bands = int(manifest.get_int(sec + "wrinkle_bands"));
    s.spec.flap_amp = manifest.get_double(sec + "flap_amp");
    s.spec.flap_region = {manifest.get_double(sec + "flap_u0"), manifest.get_double(sec + "flap_v0"),
                          manifest.get_double(sec + "flap_u1"), manifest.get_double(sec + "flap_v1")};
    s.spec.tangential_drift = manifest.get_double(sec + "tangential_drift");
    s.spec.seed = uint64_t(manifest.get_int(sec + "seed"));
    s.template_mesh = make_template(s.pose, ds.config.resolution);
    s.target_mesh = make_target(s.template_mesh, s.spec);
    ds.shapes.push_back(std::move(s));
  }
  return ds;
}

}  // namespace geoflow
