#pragma once
#include <string>
#include <vector>

#include "geoflow/trimesh.hpp"
#include "geoflow/vec3.hpp"

namespace geoflow {

// One point cloud record, stored in the exact on-disk precision so a
// write/read cycle is bit-identical.
struct CloudPoint {
  float x = 0, y = 0, z = 0;
  float nx = 0, ny = 0, nz = 0;
  float u = 0, v = 0;

  Vec3 position() const { return {x, y, z}; }
  bool operator==(const CloudPoint& o) const = default;
};

CloudPoint to_cloud_point(const SurfaceSample& s);
CloudPoint to_cloud_point(const Vec3& p);

// Binary little-endian PLY with float32 x y z nx ny nz u v.
void write_pointcloud(const std::vector<CloudPoint>& points, const std::string& path);
std::vector<CloudPoint> read_pointcloud(const std::string& path);

std::vector<Vec3> positions(const std::vector<CloudPoint>& points);
std::vector<Vec3> positions(const std::vector<SurfaceSample>& samples);

}  // namespace geoflow
