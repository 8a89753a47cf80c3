#include "geoflow/ply.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "geoflow/errors.hpp"

namespace geoflow {

CloudPoint to_cloud_point(const SurfaceSample& s) {
  CloudPoint p;
  p.x = float(s.position.x); p.y = float(s.position.y); p.z = float(s.position.z);
  p.nx = float(s.normal.x); p.ny = float(s.normal.y); p.nz = float(s.normal.z);
  p.u = float(s.uv.u); p.v = float(s.uv.v);
  return p;
}

CloudPoint to_cloud_point(const Vec3& v) {
  CloudPoint p;
  p.x = float(v.x); p.y = float(v.y); p.z = float(v.z);
  return p;
}

std::vector<Vec3> positions(const std::vector<CloudPoint>& points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.position());
  return out;
}

std::vector<Vec3> positions(const std::vector<SurfaceSample>& samples) {
  std::vector<Vec3> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.position);
  return out;
}

static const char* kProps[8] = {"x", "y", "z", "nx", "ny", "nz", "u", "v"};

void write_pointcloud(const std::vector<CloudPoint>& points, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write PLY file: " + path);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size() << "\n";
  for (const char* p : kProps) out << "property float " << p << "\n";
  out << "end_header\n";
  static_assert(sizeof(CloudPoint) == 32);
  if (!points.empty())
    out.write(reinterpret_cast<const char*>(points.data()), std::streamsize(points.size() * sizeof(CloudPoint)));
  if (!out) throw FormatError("short write on PLY file: " + path);
}

std::vector<CloudPoint> read_pointcloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open PLY file: " + path);
  std::string line;
  auto next = [&]() {
    if (!std::getline(in, line)) throw FormatError("truncated PLY header: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next() != "ply") throw FormatError("not a PLY file: " + path);
  if (next() != "format binary_little_endian 1.0")
    throw FormatError("unsupported PLY format (need binary_little_endian 1.0): " + path);

  size_t count = 0;
  int prop_idx = 0;
  bool saw_element = false;
  while (true) {
    next();
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "comment") continue;
    if (tag == "element") {
      std::string name;
      if (!(ss >> name >> count) || name != "vertex")
        throw FormatError("PLY: expected 'element vertex N': " + path);
      saw_element = true;
    } else if (tag == "property") {
      std::string type, name;
      if (!(ss >> type >> name) || type != "float")
        throw FormatError("PLY: only float properties supported: " + path);
      if (prop_idx >= 8 || name != kProps[prop_idx])
        throw FormatError("PLY: unexpected property '" + name + "' (need x y z nx ny nz u v): " + path);
      ++prop_idx;
    } else {
      throw FormatError("PLY: unexpected header line '" + line + "': " + path);
    }
  }
  if (!saw_element) throw FormatError("PLY: missing element vertex: " + path);
  if (prop_idx != 8) throw FormatError("PLY: missing property " + std::string(kProps[prop_idx]) + ": " + path);

  std::vector<CloudPoint> points(count);
  if (count) {
    in.read(reinterpret_cast<char*>(points.data()), std::streamsize(count * sizeof(CloudPoint)));
    if (size_t(in.gcount()) != count * sizeof(CloudPoint)) throw FormatError("truncated PLY payload: " + path);
  }
  return points;
}

}  // namespace geoflow
