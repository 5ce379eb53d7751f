#include "ggf/bvh.hpp"

#include <algorithm>
#include <numeric>

namespace ggf {

namespace {

inline void grow(Vec3& lo, Vec3& hi, const Vec3& p) {
  lo = lo.cwiseMin(p);
  hi = hi.cwiseMax(p);
}

// Slab test against an AABB; t range is clipped in place on success.
inline bool ray_box(const Vec3& o, const Vec3& inv_d, const Vec3& lo, const Vec3& hi,
                    double t0, double t1) {
  for (int k = 0; k < 3; ++k) {
    double a = (lo[k] - o[k]) * inv_d[k];
    double b = (hi[k] - o[k]) * inv_d[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

inline double box_dist2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = std::max({lo[k] - p[k], 0.0, p[k] - hi[k]});
    d2 += d * d;
  }
  return d2;
}

}  // namespace

bool ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                  const Vec3& c, double& t, Vec3& bary) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-14) return false;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < -1e-12 || u > 1.0 + 1e-12) return false;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv_det;
  if (v < -1e-12 || u + v > 1.0 + 1e-12) return false;
  t = e2.dot(qvec) * inv_det;
  bary = Vec3(1.0 - u - v, u, v);
  return true;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

TriangleBvh::TriangleBvh(const TriangleMesh& mesh) : mesh_(&mesh) {
  const int n = static_cast<int>(mesh.faces.size());
  if (n == 0) return;
  tri_order_.resize(n);
  std::iota(tri_order_.begin(), tri_order_.end(), 0);
  nodes_.reserve(2 * n);
  build(tri_order_, 0, n, 0);
}

int TriangleBvh::build(std::vector<int>& order, int first, int count, int depth) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  Vec3 clo = node.lo, chi = node.hi;  // centroid bounds
  for (int i = first; i < first + count; ++i) {
    const auto& f = mesh_->faces[order[i]];
    Vec3 tlo = mesh_->vertices[f[0]], thi = tlo;
    grow(tlo, thi, mesh_->vertices[f[1]]);
    grow(tlo, thi, mesh_->vertices[f[2]]);
    node.lo = node.lo.cwiseMin(tlo);
    node.hi = node.hi.cwiseMax(thi);
    grow(clo, chi, 0.5 * (tlo + thi));
  }
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (count <= 4 || depth > 48) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis;
  (chi - clo).maxCoeff(&axis);
  const int mid = first + count / 2;
  std::nth_element(order.begin() + first, order.begin() + mid,
                   order.begin() + first + count, [&](int a, int b) {
                     return mesh_->face_centroid(a)[axis] < mesh_->face_centroid(b)[axis];
                   });
  const int left = build(order, first, count / 2, depth + 1);
  const int right = build(order, mid, count - count / 2, depth + 1);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

bool TriangleBvh::raycast(const Vec3& origin, const Vec3& dir, double t_min, double t_max,
                          RayHit& hit, int skip_face) const {
  if (nodes_.empty()) return false;
  const Vec3 inv_d = dir.cwiseInverse();
  hit = RayHit{};
  hit.t = t_max;
  bool found = false;
  int stack[64];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (!ray_box(origin, inv_d, node.lo, node.hi, t_min, hit.t)) continue;
    if (node.leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int face = tri_order_[i];
        if (face == skip_face) continue;
        const auto& f = mesh_->faces[face];
        double t;
        Vec3 bary;
        if (ray_triangle(origin, dir, mesh_->vertices[f[0]], mesh_->vertices[f[1]],
                         mesh_->vertices[f[2]], t, bary) &&
            t > t_min && t < hit.t) {
          hit.t = t;
          hit.face = face;
          hit.bary = bary;
          hit.point = origin + t * dir;
          found = true;
        }
      }
    } else {
      stack[sp++] = node.left;
      stack[sp++] = node.right;
    }
  }
  return found;
}

bool TriangleBvh::ray_occluded(const Vec3& origin, const Vec3& dir, double t_min,
                               double t_max, int skip_face) const {
  if (nodes_.empty()) return false;
  const Vec3 inv_d = dir.cwiseInverse();
  int stack[64];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (!ray_box(origin, inv_d, node.lo, node.hi, t_min, t_max)) continue;
    if (node.leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int face = tri_order_[i];
        if (face == skip_face) continue;
        const auto& f = mesh_->faces[face];
        double t;
        Vec3 bary;
        if (ray_triangle(origin, dir, mesh_->vertices[f[0]], mesh_->vertices[f[1]],
                         mesh_->vertices[f[2]], t, bary) &&
            t > t_min && t < t_max)
          return true;
      }
    } else {
      stack[sp++] = node.left;
      stack[sp++] = node.right;
    }
  }
  return false;
}

ClosestPointResult TriangleBvh::closest_point(const Vec3& query) const {
  ClosestPointResult best;
  if (nodes_.empty()) return best;
  double best_d2 = std::numeric_limits<double>::infinity();
  // Priority-ordered descent on node distance keeps this near O(log n).
  struct Entry {
    double d2;
    int node;
  };
  Entry stack[64];
  int sp = 0;
  stack[sp++] = {box_dist2(query, nodes_[0].lo, nodes_[0].hi), 0};
  while (sp > 0) {
    const Entry e = stack[--sp];
    if (e.d2 >= best_d2) continue;
    const Node& node = nodes_[e.node];
    if (node.leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int face = tri_order_[i];
        const auto& f = mesh_->faces[face];
        const Vec3 p = closest_point_on_triangle(query, mesh_->vertices[f[0]],
                                                 mesh_->vertices[f[1]], mesh_->vertices[f[2]]);
        const double d2 = (p - query).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best.face = face;
          best.point = p;
        }
      }
    } else {
      Entry a{box_dist2(query, nodes_[node.left].lo, nodes_[node.left].hi), node.left};
      Entry b{box_dist2(query, nodes_[node.right].lo, nodes_[node.right].hi), node.right};
      if (a.d2 > b.d2) std::swap(a, b);  // push the nearer child last
      if (b.d2 < best_d2) stack[sp++] = b;
      if (a.d2 < best_d2) stack[sp++] = a;
    }
  }
  best.distance = std::sqrt(best_d2);
  if (best.face >= 0) best.normal = mesh_->face_normal(best.face);
  return best;
}

KdTree3::KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) return;
  std::vector<int> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(points_.size()), 0);
}

int KdTree3::build(std::vector<int>& idx, int first, int count, int depth) {
  if (count <= 0) return -1;
  const int axis = depth % 3;
  const int mid = first + count / 2;
  std::nth_element(idx.begin() + first, idx.begin() + mid, idx.begin() + first + count,
                   [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
  Node node;
  node.axis = axis;
  node.point = idx[mid];
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(idx, first, mid - first, depth + 1);
  const int right = build(idx, mid + 1, first + count - mid - 1, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree3::search(int node, const Vec3& q, int& best, double& best_d2) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const double d2 = (points_[n.point] - q).squaredNorm();
  if (d2 < best_d2) {
    best_d2 = d2;
    best = n.point;
  }
  const double delta = q[n.axis] - points_[n.point][n.axis];
  const int near = delta < 0 ? n.left : n.right;
  const int far = delta < 0 ? n.right : n.left;
  search(near, q, best, best_d2);
  if (delta * delta < best_d2) search(far, q, best, best_d2);
}

int KdTree3::nearest(const Vec3& query, double* out_dist) const {
  if (root_ < 0) return -1;
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, query, best, best_d2);
  if (out_dist) *out_dist = std::sqrt(best_d2);
  return best;
}

}  // namespace ggf
