#include "geoflow/metrics.hpp"

#include <cmath>

#include "geoflow/errors.hpp"
#include "geoflow/knn.hpp"
#include "geoflow/parallel.hpp"

namespace geoflow {

namespace {

// Directed mean NN distance from each point of `from` to the set `to`.
// Per-point results land in a preallocated slot, then a serial reduction
// keeps the sum order fixed.
double directed_mean(const std::vector<Vec3>& from, const KnnIndex& to) {
  std::vector<double> d(from.size());
  parallel_for(from.size(), [&](size_t i) { d[i] = to.query_distance(from[i]); });
  double sum = 0;
  for (double v : d) sum += v;
  return sum / double(from.size());
}

}  // namespace

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw UsageError("chamfer_distance: empty point set");
  KnnIndex ia(a), ib(b);
  return directed_mean(a, ib) + directed_mean(b, ia);
}

double surface_distance(const std::vector<Vec3>& points, const TriMesh& mesh) {
  if (points.empty()) throw UsageError("surface_distance: empty point set");
  if (mesh.empty()) throw UsageError("surface_distance: empty mesh");
  std::vector<double> d(points.size());
  parallel_for(points.size(), [&](size_t i) { d[i] = closest_point_on_mesh(mesh, points[i]).dist; });
  double sum = 0;
  for (double v : d) sum += v;
  return sum / double(points.size());
}

double coverage(const std::vector<Vec3>& synth, const std::vector<Vec3>& reference, double r) {
  if (reference.empty()) throw UsageError("coverage: empty reference set");
  if (synth.empty()) throw UsageError("coverage: empty synth set");
  if (r <= 0) throw UsageError("coverage: radius must be positive");
  KnnIndex index(synth);
  std::vector<uint8_t> hit(reference.size());
  parallel_for(reference.size(), [&](size_t i) { hit[i] = index.query_distance(reference[i]) <= r ? 1 : 0; });
  size_t count = 0;
  for (uint8_t h : hit) count += h;
  return double(count) / double(reference.size());
}

double mean_point_spacing(const std::vector<Vec3>& points) {
  if (points.size() < 2) throw UsageError("mean_point_spacing: need at least 2 points");
  KnnIndex index(points);
  std::vector<double> d(points.size());
  parallel_for(points.size(), [&](size_t i) {
    int j = index.query_nearest_excluding(points[i], int(i));
    d[i] = distance(points[i], points[j]);
  });
  double sum = 0;
  for (double v : d) sum += v;
  return sum / double(points.size());
}

}  // namespace geoflow
