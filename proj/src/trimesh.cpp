#include "geoflow/trimesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "geoflow/errors.hpp"
#include "geoflow/rng.hpp"

namespace geoflow {

Aabb TriMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.grow(v);
  return box;
}

double TriMesh::triangle_area(int f) const {
  const auto& tri = faces[f];
  return 0.5 * length(cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]));
}

double TriMesh::area() const {
  double total = 0;
  for (size_t f = 0; f < faces.size(); ++f) total += triangle_area(int(f));
  return total;
}

void TriMesh::validate() const {
  size_t nv = vertices.size();
  if (vertex_uvs.size() != nv || vertex_normals.size() != nv || vertex_canonical.size() != nv)
    throw UsageError("mesh attribute arrays do not match vertex count");
  for (const auto& tri : faces)
    for (int k = 0; k < 3; ++k)
      if (tri[k] < 0 || size_t(tri[k]) >= nv) throw UsageError("face index out of range");
  for (const auto& n : vertex_normals)
    if (std::fabs(length(n) - 1.0) > 1e-5) throw UsageError("vertex normal not unit length");
  for (const auto& uv : vertex_uvs)
    if (uv.u < -1e-9 || uv.u > 1 + 1e-9 || uv.v < -1e-9 || uv.v > 1 + 1e-9)
      throw UsageError("vertex uv outside [0,1]^2");
  Aabb box = bounds();
  for (int k = 0; k < 3; ++k)
    if (box.lo[k] < -1 - 1e-9 || box.hi[k] > 1 + 1e-9)
      throw UsageError("mesh bounding box exceeds [-1,1]^3");
}

void normalize_mesh(TriMesh& mesh) {
  if (mesh.vertices.empty()) return;
  Aabb box = mesh.bounds();
  Vec3 center = box.center();
  Vec3 half = box.extent() * 0.5;
  double m = std::max({half.x, half.y, half.z});
  double s = m > 0 ? 1.0 / m : 1.0;
  for (auto& v : mesh.vertices) v = (v - center) * s;
  for (auto& c : mesh.vertex_canonical) c = (c - center) * s;
  mesh.scale = s;
}

namespace {

int parse_obj_index(const std::string& tok, size_t count, int line_no, const char* what) {
  int idx = 0;
  try {
    idx = std::stoi(tok);
  } catch (...) {
    throw FormatError("OBJ line " + std::to_string(line_no) + ": bad " + what + " index '" + tok + "'");
  }
  if (idx < 0) idx = int(count) + idx + 1;  // negative = relative
  if (idx < 1 || size_t(idx) > count)
    throw FormatError("OBJ line " + std::to_string(line_no) + ": " + what + " index out of range");
  return idx - 1;
}

}  // namespace

TriMesh load_mesh(const std::string& path, bool normalize_to_unit) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open OBJ file: " + path);

  std::vector<Vec3> positions, normals;
  std::vector<Vec2> uvs;
  struct Corner { int v, vt, vn; };
  std::vector<std::array<Corner, 3>> tris;

  std::string line;
  int line_no = 0;
  bool saw_vt = false, saw_vn = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x >> p.y >> p.z)) throw FormatError("OBJ line " + std::to_string(line_no) + ": malformed v record");
      positions.push_back(p);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(ss >> t.u >> t.v)) throw FormatError("OBJ line " + std::to_string(line_no) + ": malformed vt record");
      uvs.push_back(t);
      saw_vt = true;
    } else if (tag == "vn") {
      Vec3 n;
      if (!(ss >> n.x >> n.y >> n.z)) throw FormatError("OBJ line " + std::to_string(line_no) + ": malformed vn record");
      normals.push_back(n);
      saw_vn = true;
    } else if (tag == "f") {
      std::vector<Corner> poly;
      std::string corner;
      while (ss >> corner) {
        size_t s1 = corner.find('/');
        size_t s2 = s1 == std::string::npos ? std::string::npos : corner.find('/', s1 + 1);
        // v//vn and bare v drop the uv channel; v/vt drops the normal
        if (s1 == std::string::npos || s2 == s1 + 1)
          throw FormatError("OBJ line " + std::to_string(line_no) + ": face corner '" + corner +
                            "' has missing attribute uv");
        if (s2 == std::string::npos)
          throw FormatError("OBJ line " + std::to_string(line_no) + ": face corner '" + corner +
                            "' has missing attribute normal");
        Corner c;
        c.v = parse_obj_index(corner.substr(0, s1), positions.size(), line_no, "vertex");
        c.vt = parse_obj_index(corner.substr(s1 + 1, s2 - s1 - 1), uvs.size(), line_no, "uv");
        c.vn = parse_obj_index(corner.substr(s2 + 1), normals.size(), line_no, "normal");
        poly.push_back(c);
      }
      if (poly.size() < 3) throw FormatError("OBJ line " + std::to_string(line_no) + ": face with fewer than 3 corners");
      for (size_t k = 2; k < poly.size(); ++k) tris.push_back({poly[0], poly[k - 1], poly[k]});
    }
  }
  if (positions.empty()) throw FormatError("OBJ has no vertices: " + path);
  if (!saw_vt) throw FormatError("missing attribute uv (no vt records): " + path);
  if (!saw_vn) throw FormatError("missing attribute normal (no vn records): " + path);

  // Split corners into unique (v, vt, vn) vertices.
  TriMesh mesh;
  std::unordered_map<uint64_t, int> corner_map;
  corner_map.reserve(tris.size() * 2);
  auto find_or_add = [&](const Corner& c) {
    uint64_t key = (uint64_t(c.v) << 42) | (uint64_t(c.vt) << 21) | uint64_t(c.vn);
    auto it = corner_map.find(key);
    if (it != corner_map.end()) return it->second;
    int id = int(mesh.vertices.size());
    corner_map.emplace(key, id);
    mesh.vertices.push_back(positions[c.v]);
    mesh.vertex_uvs.push_back(uvs[c.vt]);
    Vec3 n = normals[c.vn];
    double len = length(n);
    if (len < 1e-12) throw FormatError("zero-length normal in OBJ: " + path);
    mesh.vertex_normals.push_back(n / len);
    return id;
  };
  for (const auto& tri : tris) {
    mesh.faces.push_back({find_or_add(tri[0]), find_or_add(tri[1]), find_or_add(tri[2])});
  }
  mesh.vertex_canonical = mesh.vertices;
  if (normalize_to_unit) {
    normalize_mesh(mesh);
    mesh.vertex_canonical = mesh.vertices;
  }
  mesh.validate();
  return mesh;
}

void save_mesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write OBJ file: " + path);
  char buf[256];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const auto& t : mesh.vertex_uvs) {
    std::snprintf(buf, sizeof buf, "vt %.17g %.17g\n", t.u, t.v);
    out << buf;
  }
  for (const auto& n : mesh.vertex_normals) {
    std::snprintf(buf, sizeof buf, "vn %.17g %.17g %.17g\n", n.x, n.y, n.z);
    out << buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof buf, "f %d/%d/%d %d/%d/%d %d/%d/%d\n", f[0] + 1, f[0] + 1, f[0] + 1,
                  f[1] + 1, f[1] + 1, f[1] + 1, f[2] + 1, f[2] + 1, f[2] + 1);
    out << buf;
  }
}

SurfaceSample interpolate_on_face(const TriMesh& mesh, int face, const Vec3& bary) {
  const auto& tri = mesh.faces[face];
  SurfaceSample s;
  s.face = face;
  s.barycentric = bary;
  s.position = mesh.vertices[tri[0]] * bary.x + mesh.vertices[tri[1]] * bary.y + mesh.vertices[tri[2]] * bary.z;
  Vec3 n = mesh.vertex_normals[tri[0]] * bary.x + mesh.vertex_normals[tri[1]] * bary.y +
           mesh.vertex_normals[tri[2]] * bary.z;
  double len = length(n);
  s.normal = len > 1e-12 ? n / len : mesh.vertex_normals[tri[0]];
  s.uv.u = mesh.vertex_uvs[tri[0]].u * bary.x + mesh.vertex_uvs[tri[1]].u * bary.y + mesh.vertex_uvs[tri[2]].u * bary.z;
  s.uv.v = mesh.vertex_uvs[tri[0]].v * bary.x + mesh.vertex_uvs[tri[1]].v * bary.y + mesh.vertex_uvs[tri[2]].v * bary.z;
  s.canonical = mesh.vertex_canonical[tri[0]] * bary.x + mesh.vertex_canonical[tri[1]] * bary.y +
                mesh.vertex_canonical[tri[2]] * bary.z;
  return s;
}

std::vector<SurfaceSample> sample_surface(const TriMesh& mesh, size_t n, uint64_t seed) {
  if (n < 1) throw UsageError("sample_surface: n must be >= 1");
  if (mesh.empty()) throw UsageError("sample_surface: empty mesh");

  std::vector<double> cdf(mesh.faces.size());
  double total = 0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.triangle_area(int(f));
    cdf[f] = total;
  }
  if (total <= 0) throw UsageError("sample_surface: mesh has zero total area");

  Rng rng(seed, /*stream=*/0x5a);
  std::vector<SurfaceSample> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    double r = rng.uniform() * total;
    size_t f = std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin();
    if (f >= cdf.size()) f = cdf.size() - 1;
    // uniform barycentric via the sqrt trick
    double su = std::sqrt(rng.uniform());
    double v = rng.uniform();
    Vec3 bary{1.0 - su, su * (1.0 - v), su * v};
    out.push_back(interpolate_on_face(mesh, int(f), bary));
  }
  return out;
}

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return a;

  Vec3 bp = p - b;
  double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return b;

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double v = d1 / (d1 - d3);
    return a + ab * v;
  }

  Vec3 cp = p - c;
  double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return c;

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double w = d2 / (d2 - d6);
    return a + ac * w;
  }

  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + (c - b) * w;
  }

  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return a + ab * v + ac * w;
}

ClosestHit closest_point_on_mesh(const TriMesh& mesh, const Vec3& q) {
  if (mesh.empty()) throw UsageError("closest_point_on_mesh: empty mesh");
  ClosestHit best;
  best.dist = std::numeric_limits<double>::infinity();
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    Vec3 cp = closest_point_on_triangle(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]], q);
    double d2 = distance2(cp, q);
    if (d2 < best.dist) {
      best.dist = d2;
      best.point = cp;
      best.face = int(f);
    }
  }
  best.dist = std::sqrt(best.dist);
  return best;
}

}  // namespace geoflow
