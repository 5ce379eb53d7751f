#include "ggf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace ggf {

namespace {

constexpr double kDegenerateArea = 1e-12;  // m^2

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

// Signed dihedral angle between the (unit) normals of two faces sharing the
// directed edge e_hat; positive when the pair folds along +e_hat.
double signed_dihedral(const Vec3& na, const Vec3& nb, const Vec3& e_hat) {
  const double s = na.cross(nb).dot(e_hat);
  const double c = na.dot(nb);
  return std::atan2(s, c);
}

// 2D triangle-triangle intersection area via Sutherland-Hodgman clipping.
// Used only for the UV-chart overlap validation on load.
double clip_area(const std::array<Vec2, 3>& subject, const std::array<Vec2, 3>& clip) {
  std::vector<Vec2> poly(subject.begin(), subject.end());
  // Ensure the clip triangle is CCW.
  std::array<Vec2, 3> c = clip;
  const double cross = (c[1] - c[0]).x() * (c[2] - c[0]).y() -
                       (c[1] - c[0]).y() * (c[2] - c[0]).x();
  if (cross < 0) std::swap(c[1], c[2]);
  for (int i = 0; i < 3 && !poly.empty(); ++i) {
    const Vec2 a = c[i], b = c[(i + 1) % 3];
    const Vec2 dir = b - a;
    std::vector<Vec2> out;
    const size_t n = poly.size();
    for (size_t j = 0; j < n; ++j) {
      const Vec2 p = poly[j], q = poly[(j + 1) % n];
      const double dp = dir.x() * (p.y() - a.y()) - dir.y() * (p.x() - a.x());
      const double dq = dir.x() * (q.y() - a.y()) - dir.y() * (q.x() - a.x());
      if (dp >= 0) out.push_back(p);
      if ((dp >= 0) != (dq >= 0)) {
        const double t = dp / (dp - dq);
        out.push_back(p + t * (q - p));
      }
    }
    poly = std::move(out);
  }
  double area = 0.0;
  for (size_t j = 1; j + 1 < poly.size(); ++j) {
    const Vec2 u = poly[j] - poly[0], v = poly[j + 1] - poly[0];
    area += 0.5 * (u.x() * v.y() - u.y() * v.x());
  }
  return std::abs(area);
}

}  // namespace

void TriangleMesh::set_positions(std::vector<Vec3> positions) {
  if (positions.size() != vertices.size())
    throw InvalidMesh("position buffer size mismatch");
  vertices = std::move(positions);
}

Vec3 TriangleMesh::face_normal(int face) const {
  const auto& f = faces[face];
  const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
  const double len = n.norm();
  if (len < 1e-18) throw DegenerateFace("face " + std::to_string(face) + " has zero area");
  return n / len;
}

Vec3 TriangleMesh::face_centroid(int face) const {
  const auto& f = faces[face];
  return (vertices[f[0]] + vertices[f[1]] + vertices[f[2]]) / 3.0;
}

Vec3 TriangleMesh::rest_face_centroid(int face) const {
  const auto& f = faces[face];
  const auto& r = rest();
  return (r[f[0]] + r[f[1]] + r[f[2]]) / 3.0;
}

double TriangleMesh::face_area(int face) const {
  const auto& f = faces[face];
  return triangle_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]);
}

void TriangleMesh::bounds(Vec3& lo, Vec3& hi) const {
  lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
}

double TriangleMesh::bbox_diagonal() const {
  if (vertices.empty()) return 0.0;
  Vec3 lo, hi;
  bounds(lo, hi);
  return (hi - lo).norm();
}

void validate_mesh(const TriangleMesh& mesh) {
  if (mesh.vertices.empty() || mesh.faces.empty())
    throw InvalidMesh("mesh has no vertices or faces");
  const int nv = static_cast<int>(mesh.vertices.size());
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.faces[i][k];
      if (v < 0 || v >= nv)
        throw InvalidMesh("face " + std::to_string(i) + " references vertex " +
                          std::to_string(v) + " out of range");
    }
  }
  if (!mesh.rest_positions.empty() && mesh.rest_positions.size() != mesh.vertices.size())
    throw InvalidMesh("rest_positions length does not match vertices");
  if (!mesh.uvs.empty() && mesh.uvs.size() != mesh.faces.size())
    throw InvalidMesh("uvs length does not match faces");

  const auto& rest = mesh.rest();
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    if (triangle_area(rest[f[0]], rest[f[1]], rest[f[2]]) <= kDegenerateArea)
      throw InvalidMesh("face " + std::to_string(i) + " is degenerate in the rest pose");
  }

  // UV charts must not overlap. Grid-binned pairwise test; adjacency along
  // shared edges clips to zero area and passes.
  if (mesh.has_uvs()) {
    const int cells = 32;
    std::vector<std::vector<int>> grid(cells * cells);
    auto cell_range = [&](const std::array<Vec2, 3>& tri, int& x0, int& x1, int& y0, int& y1) {
      Vec2 lo = tri[0].cwiseMin(tri[1]).cwiseMin(tri[2]);
      Vec2 hi = tri[0].cwiseMax(tri[1]).cwiseMax(tri[2]);
      x0 = std::clamp(static_cast<int>(lo.x() * cells), 0, cells - 1);
      x1 = std::clamp(static_cast<int>(hi.x() * cells), 0, cells - 1);
      y0 = std::clamp(static_cast<int>(lo.y() * cells), 0, cells - 1);
      y1 = std::clamp(static_cast<int>(hi.y() * cells), 0, cells - 1);
    };
    for (size_t i = 0; i < mesh.uvs.size(); ++i) {
      int x0, x1, y0, y1;
      cell_range(mesh.uvs[i], x0, x1, y0, y1);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          for (int j : grid[y * cells + x]) {
            if (clip_area(mesh.uvs[i], mesh.uvs[j]) > 1e-12)
              throw InvalidMesh("UV triangles of faces " + std::to_string(j) + " and " +
                                std::to_string(i) + " overlap");
          }
        }
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) grid[y * cells + x].push_back(static_cast<int>(i));
    }
  }
}

Topology build_topology(const TriangleMesh& mesh) {
  if (mesh.vertices.empty() || mesh.faces.empty()) throw InvalidMesh("empty mesh");

  struct EdgeInfo {
    std::vector<int> faces;
    std::vector<int> opposite;
  };
  std::map<std::array<int, 2>, EdgeInfo> edge_map;  // ordered for determinism
  for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto& f = mesh.faces[fi];
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      const int opp = f[(k + 2) % 3];
      if (a > b) std::swap(a, b);
      auto& info = edge_map[{a, b}];
      info.faces.push_back(static_cast<int>(fi));
      info.opposite.push_back(opp);
    }
  }

  Topology topo;
  topo.vertex_adjacency.resize(mesh.vertices.size());
  const auto& rest = mesh.rest();
  for (const auto& [edge, info] : edge_map) {
    topo.edges.push_back(edge);
    topo.vertex_adjacency[edge[0]].push_back(edge[1]);
    topo.vertex_adjacency[edge[1]].push_back(edge[0]);
    if (info.faces.size() > 2) {
      topo.nonmanifold_edges.push_back(edge);
      continue;
    }
    if (info.faces.size() == 2) {
      DihedralPair pair;
      pair.face_a = info.faces[0];
      pair.face_b = info.faces[1];
      pair.edge_v0 = edge[0];
      pair.edge_v1 = edge[1];
      pair.opp_a = info.opposite[0];
      pair.opp_b = info.opposite[1];
      const Vec3 e = rest[edge[1]] - rest[edge[0]];
      pair.rest_edge_length = e.norm();
      const auto& fa = mesh.faces[pair.face_a];
      const auto& fb = mesh.faces[pair.face_b];
      const double area_a = triangle_area(rest[fa[0]], rest[fa[1]], rest[fa[2]]);
      const double area_b = triangle_area(rest[fb[0]], rest[fb[1]], rest[fb[2]]);
      pair.rest_area_sum = area_a + area_b;
      const Vec3 na = (rest[fa[1]] - rest[fa[0]]).cross(rest[fa[2]] - rest[fa[0]]).normalized();
      const Vec3 nb = (rest[fb[1]] - rest[fb[0]]).cross(rest[fb[2]] - rest[fb[0]]).normalized();
      pair.rest_angle = signed_dihedral(na, nb, e.normalized());
      topo.dihedral_pairs.push_back(pair);
    }
  }
  for (auto& adj : topo.vertex_adjacency) std::sort(adj.begin(), adj.end());
  return topo;
}

Vec3 surface_point_position(const TriangleMesh& mesh, const SurfacePoint& sp) {
  if (sp.face < 0 || sp.face >= static_cast<int>(mesh.faces.size()))
    throw InvalidSurfacePoint("face index " + std::to_string(sp.face) + " out of range");
  const auto& f = mesh.faces[sp.face];
  return sp.bary[0] * mesh.vertices[f[0]] + sp.bary[1] * mesh.vertices[f[1]] +
         sp.bary[2] * mesh.vertices[f[2]];
}

LocalFrame local_frame(const TriangleMesh& mesh, const SurfacePoint& sp) {
  if (sp.face < 0 || sp.face >= static_cast<int>(mesh.faces.size()))
    throw InvalidSurfacePoint("face index out of range");
  const auto& f = mesh.faces[sp.face];
  const Vec3& p0 = mesh.vertices[f[0]];
  const Vec3& p1 = mesh.vertices[f[1]];
  const Vec3& p2 = mesh.vertices[f[2]];

  const Vec3 e = p1 - p0;                    // designated edge
  const Vec3 n_raw = e.cross(p2 - p0);
  const double base = e.norm();
  const double n_len = n_raw.norm();
  if (n_len < 2.0 * kDegenerateArea || base < 1e-12)
    throw DegenerateFace("face " + std::to_string(sp.face) + " is degenerate");

  const Vec3 e_hat = e / base;
  const Vec3 n_hat = n_raw / n_len;
  LocalFrame frame;
  frame.rotation.col(0) = e_hat;
  frame.rotation.col(1) = n_hat.cross(e_hat);
  frame.rotation.col(2) = n_hat;
  frame.origin = surface_point_position(mesh, sp);
  const double height = n_len / base;  // 2*area / base
  frame.scale = 0.5 * (base + height);
  return frame;
}

void accumulate_frame_gradients(const TriangleMesh& mesh, const SurfacePoint& sp,
                                const Mat3& grad_rotation, double grad_scale,
                                const Vec3& grad_origin,
                                std::vector<Vec3>& vertex_grads) {
  const auto& f = mesh.faces[sp.face];
  const Vec3& p0 = mesh.vertices[f[0]];
  const Vec3& p1 = mesh.vertices[f[1]];
  const Vec3& p2 = mesh.vertices[f[2]];

  const Vec3 e = p1 - p0;
  const Vec3 w = p2 - p0;
  const Vec3 n_raw = e.cross(w);
  const double base = e.norm();
  const double n_len = n_raw.norm();
  const Vec3 e_hat = e / base;
  const Vec3 n_hat = n_raw / n_len;

  // Columns of the frame: c0 = e_hat, c1 = n_hat x e_hat, c2 = n_hat.
  // Fold the middle column into the other two:
  //   d c1 = dn x e_hat + n x de = -[e_hat]x dn + [n_hat]x de.
  const Vec3 g_c1 = grad_rotation.col(1);
  const Vec3 g_e = grad_rotation.col(0) - n_hat.cross(g_c1);
  const Vec3 g_n = grad_rotation.col(2) + e_hat.cross(g_c1);

  // e_hat path: d e_hat = (I - e_hat e_hat^T)/|e| de, with de/dp1 = I, de/dp0 = -I.
  const Vec3 ge_proj = (g_e - e_hat * e_hat.dot(g_e)) / base;

  // n_hat path: dn_raw = -[w]x de + [e]x dw; adjoints are cross products.
  const Vec3 h = (g_n - n_hat * n_hat.dot(g_n)) / n_len;
  const Vec3 gn_p1 = w.cross(h);   // via de
  const Vec3 gn_p2 = h.cross(e);   // via dw
  // scale = (|e| + |n_raw|/|e|)/2.
  const double dk_dbase = 0.5 * (1.0 - n_len / (base * base));
  const double dk_dnlen = 0.5 / base;
  const Vec3 gk_p1 = grad_scale * (dk_dbase * e_hat + dk_dnlen * w.cross(n_hat));
  const Vec3 gk_p2 = grad_scale * (dk_dnlen * n_hat.cross(e));

  Vec3 g1 = ge_proj + gn_p1 + gk_p1;
  Vec3 g2 = gn_p2 + gk_p2;
  Vec3 g0 = -(g1 + g2);

  g0 += sp.bary[0] * grad_origin;
  g1 += sp.bary[1] * grad_origin;
  g2 += sp.bary[2] * grad_origin;

  vertex_grads[f[0]] += g0;
  vertex_grads[f[1]] += g1;
  vertex_grads[f[2]] += g2;
}

std::vector<FaceRestState> build_rest_states(const TriangleMesh& mesh, double thickness) {
  if (thickness <= 0.0) throw InvalidMesh("thickness must be positive");
  const auto& rest = mesh.rest();
  std::vector<FaceRestState> states(mesh.faces.size());
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    const Vec3 u = rest[f[1]] - rest[f[0]];
    const Vec3 w = rest[f[2]] - rest[f[0]];
    const double area = 0.5 * u.cross(w).norm();
    if (area <= kDegenerateArea)
      throw DegenerateFace("face " + std::to_string(i) + " is degenerate in the rest pose");
    // Isometric flattening into the rest tangent plane.
    const Vec3 t0 = u.normalized();
    const Vec3 nrm = u.cross(w).normalized();
    const Vec3 t1 = nrm.cross(t0);
    Mat2 rest_edges;
    rest_edges << u.norm(), w.dot(t0), 0.0, w.dot(t1);
    FaceRestState st;
    st.inv_rest_edges = rest_edges.inverse();
    st.rest_area = area;
    st.thickness = thickness;
    states[i] = st;
  }
  return states;
}

Mat32 deformation_gradient(const TriangleMesh& current,
                           const std::vector<FaceRestState>& rest, int face) {
  if (face < 0 || face >= static_cast<int>(current.faces.size()) ||
      face >= static_cast<int>(rest.size()))
    throw MissingRestState("no rest state for face " + std::to_string(face));
  const auto& f = current.faces[face];
  Mat32 edges;
  edges.col(0) = current.vertices[f[1]] - current.vertices[f[0]];
  edges.col(1) = current.vertices[f[2]] - current.vertices[f[0]];
  return edges * rest[face].inv_rest_edges;
}

double pairwise_sum(const double* values, size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = values[0];
    for (size_t i = 1; i < n; ++i) s += values[i];
    return s;
  }
  const size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

}  // namespace ggf
