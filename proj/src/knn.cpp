#include "geoflow/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geoflow/errors.hpp"

namespace geoflow {

KnnIndex::KnnIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw UsageError("KnnIndex: empty point set");
  std::vector<int> order(points_.size());
  std::iota(order.begin(), order.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(order.data(), order.data() + order.size(), 0);
}

int KnnIndex::build(int* begin, int* end, int depth) {
  if (begin == end) return -1;
  int axis = depth % 3;
  int* mid = begin + (end - begin) / 2;
  std::nth_element(begin, mid, end, [&](int a, int b) {
    double pa = points_[a][axis], pb = points_[b][axis];
    return pa < pb || (pa == pb && a < b);
  });
  int id = int(nodes_.size());
  nodes_.push_back({});
  nodes_[id].point = *mid;
  nodes_[id].axis = axis;
  int left = build(begin, mid, depth + 1);
  int right = build(mid + 1, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KnnIndex::search(int node, const Vec3& q, int skip, double& best_d2, int& best_idx) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  if (n.point != skip) {
    double d2 = distance2(points_[n.point], q);
    if (d2 < best_d2 || (d2 == best_d2 && n.point < best_idx)) {
      best_d2 = d2;
      best_idx = n.point;
    }
  }
  double delta = q[n.axis] - points_[n.point][n.axis];
  int near = delta < 0 ? n.left : n.right;
  int far = delta < 0 ? n.right : n.left;
  search(near, q, skip, best_d2, best_idx);
  // The far side can still hold an equal-distance lower index, so recurse on <=.
  if (delta * delta <= best_d2) search(far, q, skip, best_d2, best_idx);
}

int KnnIndex::query_nearest(const Vec3& q) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_idx = int(points_.size());
  search(root_, q, -1, best_d2, best_idx);
  return best_idx;
}

int KnnIndex::query_nearest_excluding(const Vec3& q, int skip) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_idx = int(points_.size());
  search(root_, q, skip, best_d2, best_idx);
  return best_idx;
}

double KnnIndex::query_distance(const Vec3& q) const {
  return distance(points_[query_nearest(q)], q);
}

}  // namespace geoflow
