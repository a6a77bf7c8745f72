#pragma once

#include <span>
#include <vector>

#include "tfkit/mesh.hpp"

namespace tfkit {

struct BvhNode {
  Bounds3 bounds;
  // leaf: triangles [start, start + count) of Bvh::triangle_order
  // interior: count == 0, children at `left` and `left + 1`
  int start = 0;
  int count = 0;
  int left = -1;

  bool is_leaf() const { return count > 0; }
};

// Median-split binary BVH over mesh triangles; node 0 is the root.
struct Bvh {
  std::vector<BvhNode> nodes;
  std::vector<int> triangle_order;
};

constexpr int bvh_leaf_size = 4;
constexpr double bvh_bounds_epsilon = 1e-9;

Bvh build_bvh(const TriMesh& mesh);

struct ClosestHit {
  vec3 point = vec3::Zero();
  int face_id = -1;
  vec3 bary = vec3::Zero();
  double distance = std::numeric_limits<double>::infinity();
};

// Region-based closest point on triangle (a, b, c); returns barycentrics.
vec3 closest_point_triangle(const vec3& p, const vec3& a, const vec3& b, const vec3& c);

// Exact nearest surface point. Ties on distance resolve to the lowest face id.
ClosestHit closest_point(const Bvh& bvh, const TriMesh& mesh, const vec3& x);

// Linear-scan reference for closest_point.
ClosestHit brute_closest(const TriMesh& mesh, const vec3& x);

double udf(const Bvh& bvh, const TriMesh& mesh, const vec3& x);

// Batched queries, parallel over points.
std::vector<ClosestHit> closest_points(const Bvh& bvh, const TriMesh& mesh, std::span<const vec3> points);

int bvh_depth(const Bvh& bvh);

}  // namespace tfkit
