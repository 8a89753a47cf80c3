#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geoflow/vec3.hpp"

namespace geoflow {

struct Vec2 {
  double u = 0, v = 0;
};

// Triangle mesh with per-vertex UVs, unit normals and canonical coordinates.
// Shapes are normalized to fit [-1,1]^3; `scale` records the factor applied.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec2> vertex_uvs;
  std::vector<Vec3> vertex_normals;
  std::vector<Vec3> vertex_canonical;
  double scale = 1.0;  // applied at normalization (new = scale * (old - center))

  size_t vertex_count() const { return vertices.size(); }
  size_t face_count() const { return faces.size(); }
  bool empty() const { return faces.empty(); }

  Aabb bounds() const;
  double area() const;
  double triangle_area(int f) const;

  // Throws UsageError if any invariant is violated (index ranges, unit
  // normals within 1e-5, UVs in [0,1]^2, bbox within [-1,1]^3 + eps).
  void validate() const;
};

struct SurfaceSample {
  Vec3 position;
  Vec3 normal;     // barycentric-interpolated, renormalized
  Vec2 uv;
  Vec3 canonical;
  int face = -1;
  Vec3 barycentric;  // weights on the sampled triangle
};

// OBJ I/O. Requires v/vt/vn records and f v/vt/vn faces; polygons are
// fan-triangulated. Canonical coordinates of a loaded mesh default to the
// normalized positions (toy meshes are rebuilt from their manifest instead
// when exact canonical fields matter).
TriMesh load_mesh(const std::string& path, bool normalize_to_unit = true);
void save_mesh(const TriMesh& mesh, const std::string& path);

// Uniform translate+scale so the bounding box is centered and the longest
// axis spans exactly [-1,1]. Canonical coordinates get the same transform.
void normalize_mesh(TriMesh& mesh);

// Area-weighted triangle selection, uniform barycentric coordinates.
std::vector<SurfaceSample> sample_surface(const TriMesh& mesh, size_t n, uint64_t seed);

// Exact closest point over all triangles (interior/edge/vertex cases).
struct ClosestHit {
  Vec3 point;
  double dist = 0;
  int face = -1;
};
ClosestHit closest_point_on_mesh(const TriMesh& mesh, const Vec3& q);
Vec3 closest_point_on_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& q);

// Attributes at a barycentric location on a face.
SurfaceSample interpolate_on_face(const TriMesh& mesh, int face, const Vec3& bary);

}  // namespace geoflow
