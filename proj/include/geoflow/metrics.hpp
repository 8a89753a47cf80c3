#pragma once
#include <vector>

#include "geoflow/trimesh.hpp"
#include "geoflow/vec3.hpp"

namespace geoflow {

// Symmetric Chamfer distance: mean over A of the nearest (unsquared)
// Euclidean distance to B, plus the same with A and B swapped.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Mean over points of the exact closest-point distance to the mesh surface.
double surface_distance(const std::vector<Vec3>& points, const TriMesh& mesh);

// Fraction of reference points with at least one synth point within r.
double coverage(const std::vector<Vec3>& synth, const std::vector<Vec3>& reference, double r);

// Mean nearest-neighbor spacing within one point set (used to pick the
// coverage radius).
double mean_point_spacing(const std::vector<Vec3>& points);

}  // namespace geoflow
