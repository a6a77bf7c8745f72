#include "tfkit/spatial.hpp"

#include <algorithm>
#include <numeric>

namespace tfkit {

namespace {

vec3 closest_on_segment(const vec3& p, const vec3& a, const vec3& b, double& t) {
  vec3 ab = b - a;
  double len2 = ab.squaredNorm();
  t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return a + t * ab;
}

// Fallback for triangles whose vertices are collinear.
vec3 closest_degenerate(const vec3& p, const vec3& a, const vec3& b, const vec3& c) {
  double t_ab, t_bc, t_ca;
  double d_ab = (closest_on_segment(p, a, b, t_ab) - p).squaredNorm();
  double d_bc = (closest_on_segment(p, b, c, t_bc) - p).squaredNorm();
  double d_ca = (closest_on_segment(p, c, a, t_ca) - p).squaredNorm();
  if (d_ab <= d_bc && d_ab <= d_ca) return {1 - t_ab, t_ab, 0};
  if (d_bc <= d_ca) return {0, 1 - t_bc, t_bc};
  return {t_ca, 0, 1 - t_ca};
}

double box_distance2(const Bounds3& b, const vec3& p) {
  vec3 d = (b.min - p).cwiseMax(p - b.max).cwiseMax(0.0);
  return d.squaredNorm();
}

ClosestHit triangle_hit(const TriMesh& mesh, int face, const vec3& x) {
  ClosestHit hit;
  hit.face_id = face;
  hit.bary = closest_point_triangle(x, mesh.vertex(face, 0), mesh.vertex(face, 1), mesh.vertex(face, 2));
  hit.point = mesh.interpolate(face, hit.bary);
  hit.distance = (x - hit.point).norm();
  return hit;
}

bool better(const ClosestHit& a, const ClosestHit& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.face_id < b.face_id);
}

}  // namespace

vec3 closest_point_triangle(const vec3& p, const vec3& a, const vec3& b, const vec3& c) {
  vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return {1, 0, 0};

  vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return {0, 1, 0};

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0 && d1 - d3 > 0) {
    double v = d1 / (d1 - d3);
    return {1 - v, v, 0};
  }

  vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return {0, 0, 1};

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0 && d2 - d6 > 0) {
    double w = d2 / (d2 - d6);
    return {1 - w, 0, w};
  }

  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0 && (d4 - d3) + (d5 - d6) > 0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {0, 1 - w, w};
  }

  double denom = va + vb + vc;
  if (!(denom > 0)) return closest_degenerate(p, a, b, c);
  double v = vb / denom, w = vc / denom;
  return {1 - v - w, v, w};
}

Bvh build_bvh(const TriMesh& mesh) {
  Bvh bvh;
  int n = int(mesh.faces.size());
  if (n == 0) return bvh;
  bvh.triangle_order.resize(n);
  std::iota(bvh.triangle_order.begin(), bvh.triangle_order.end(), 0);

  std::vector<Bounds3> tri_bounds(n);
  std::vector<vec3> centroids(n);
  for (int f = 0; f < n; f++) {
    for (int k = 0; k < 3; k++) tri_bounds[f].expand(mesh.vertex(f, k));
    centroids[f] = (mesh.vertex(f, 0) + mesh.vertex(f, 1) + mesh.vertex(f, 2)) / 3;
  }

  bvh.nodes.reserve(size_t(2 * std::max(1, n / bvh_leaf_size) + 1));
  bvh.nodes.emplace_back();
  struct Task {
    int node, start, end;
  };
  std::vector<Task> stack = {{0, 0, n}};
  while (!stack.empty()) {
    auto [node, start, end] = stack.back();
    stack.pop_back();
    Bounds3 bounds;
    for (int i = start; i < end; i++) bounds.expand(tri_bounds[bvh.triangle_order[i]]);
    bounds.min.array() -= bvh_bounds_epsilon;
    bounds.max.array() += bvh_bounds_epsilon;
    bvh.nodes[node].bounds = bounds;
    if (end - start <= bvh_leaf_size) {
      bvh.nodes[node].start = start;
      bvh.nodes[node].count = end - start;
      continue;
    }
    int axis;
    bounds.extent().maxCoeff(&axis);
    int mid = (start + end) / 2;
    std::nth_element(bvh.triangle_order.begin() + start, bvh.triangle_order.begin() + mid,
                     bvh.triangle_order.begin() + end, [&](int a, int b) {
                       double ca = centroids[a][axis], cb = centroids[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    int left = int(bvh.nodes.size());
    bvh.nodes[node].left = left;
    bvh.nodes.emplace_back();
    bvh.nodes.emplace_back();
    stack.push_back({left + 1, mid, end});
    stack.push_back({left, start, mid});
  }
  return bvh;
}

ClosestHit closest_point(const Bvh& bvh, const TriMesh& mesh, const vec3& x) {
  ClosestHit best;
  if (bvh.nodes.empty()) return best;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const auto& node = bvh.nodes[stack[--top]];
    if (box_distance2(node.bounds, x) > best.distance * best.distance) continue;
    if (node.is_leaf()) {
      for (int i = node.start; i < node.start + node.count; i++) {
        auto hit = triangle_hit(mesh, bvh.triangle_order[i], x);
        if (better(hit, best)) best = hit;
      }
      continue;
    }
    int near = node.left, far = node.left + 1;
    if (box_distance2(bvh.nodes[far].bounds, x) < box_distance2(bvh.nodes[near].bounds, x))
      std::swap(near, far);
    stack[top++] = far;
    stack[top++] = near;
  }
  return best;
}

ClosestHit brute_closest(const TriMesh& mesh, const vec3& x) {
  ClosestHit best;
  for (int f = 0; f < int(mesh.faces.size()); f++) {
    auto hit = triangle_hit(mesh, f, x);
    if (better(hit, best)) best = hit;
  }
  return best;
}

double udf(const Bvh& bvh, const TriMesh& mesh, const vec3& x) { return closest_point(bvh, mesh, x).distance; }

std::vector<ClosestHit> closest_points(const Bvh& bvh, const TriMesh& mesh, std::span<const vec3> points) {
  std::vector<ClosestHit> hits(points.size());
  const long n = long(points.size());
#pragma omp parallel for schedule(dynamic, 256) num_threads(threads())
  for (long i = 0; i < n; i++) hits[i] = closest_point(bvh, mesh, points[i]);
  return hits;
}

int bvh_depth(const Bvh& bvh) {
  if (bvh.nodes.empty()) return 0;
  int depth = 0;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    depth = std::max(depth, d);
    if (!bvh.nodes[n].is_leaf()) {
      stack.push_back({bvh.nodes[n].left, d + 1});
      stack.push_back({bvh.nodes[n].left + 1, d + 1});
    }
  }
  return depth;
}

}  // namespace tfkit
