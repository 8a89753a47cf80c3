#pragma once
#include <vector>

#include "geoflow/vec3.hpp"

namespace geoflow {

// Balanced kd-tree over a fixed point set; immutable after build.
// Queries return the exact brute-force argmin; ties break to the lowest
// original point index.
class KnnIndex {
 public:
  explicit KnnIndex(std::vector<Vec3> points);

  int query_nearest(const Vec3& q) const;
  double query_distance(const Vec3& q) const;  // distance to the nearest point

  // Nearest point whose original index differs from `skip` (self-exclusion
  // for within-set spacing queries).
  int query_nearest_excluding(const Vec3& q, int skip) const;

  const std::vector<Vec3>& points() const { return points_; }
  size_t size() const { return points_.size(); }

 private:
  struct Node {
    int point = -1;   // original index of the splitting point
    int axis = 0;
    int left = -1, right = -1;
  };

  int build(int* begin, int* end, int depth);
  void search(int node, const Vec3& q, int skip, double& best_d2, int& best_idx) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace geoflow
