#pragma once

#include <limits>
#include <vector>

#include "ggf/mesh.hpp"

namespace ggf {

struct RayHit {
  int face = -1;
  double t = std::numeric_limits<double>::infinity();  // distance along the ray
  Vec3 point = Vec3::Zero();
  Vec3 bary = Vec3::Zero();
};

struct ClosestPointResult {
  int face = -1;
  double distance = std::numeric_limits<double>::infinity();
  Vec3 point = Vec3::Zero();   // witness point on the surface
  Vec3 normal = Vec3::Zero();  // CCW normal of the hit face
};

// Axis-aligned median-split BVH over triangles. Rebuild (refit) by
// constructing a new instance; queries are const and thread-safe.
class TriangleBvh {
 public:
  TriangleBvh() = default;
  explicit TriangleBvh(const TriangleMesh& mesh);

  // First intersection along origin + t*dir with t in (t_min, t_max);
  // skip_face is excluded from the test.
  bool raycast(const Vec3& origin, const Vec3& dir, double t_min, double t_max,
               RayHit& hit, int skip_face = -1) const;

  // Any intersection in (t_min, t_max); cheaper than the closest hit.
  bool ray_occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max,
                    int skip_face = -1) const;

  ClosestPointResult closest_point(const Vec3& query) const;

  bool empty() const { return nodes_.empty(); }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // children, or
    int first = 0, count = 0;   // leaf triangle range
    bool leaf() const { return count > 0; }
  };

  int build(std::vector<int>& order, int first, int count, int depth);

  const TriangleMesh* mesh_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<int> tri_order_;
};

// Closest point on a single triangle (Ericson, Real-Time Collision Detection).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Moeller-Trumbore; returns false for parallel or out-of-triangle rays.
bool ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                  const Vec3& c, double& t, Vec3& bary);

// Nearest-neighbour search over a fixed point set.
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(std::vector<Vec3> points);

  // Index of the nearest point, or -1 if empty.
  int nearest(const Vec3& query, double* out_dist = nullptr) const;
  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    int axis = 0;
    int point = -1;
    int left = -1, right = -1;
  };
  int build(std::vector<int>& idx, int first, int count, int depth);
  void search(int node, const Vec3& q, int& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace ggf
