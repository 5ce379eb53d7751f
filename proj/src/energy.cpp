#include "ggf/energy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ggf/rng.hpp"

namespace ggf {

namespace {

// Scatter the adjoint of a normalized face normal back to the face vertices.
// g is dL/d(n_hat); u = p1 - p0, w = p2 - p0, n_raw = u x w.
void scatter_normal_grad(const Vec3& g, const Vec3& n_hat, double n_len, const Vec3& u,
                         const Vec3& w, Vec3& g0, Vec3& g1, Vec3& g2) {
  const Vec3 h = (g - n_hat * n_hat.dot(g)) / n_len;
  const Vec3 via_u = w.cross(h);
  const Vec3 via_w = h.cross(u);
  g1 += via_u;
  g2 += via_w;
  g0 -= via_u + via_w;
}

struct FaceNormal {
  Vec3 n_hat;
  double n_len;
  Vec3 u, w;
};

FaceNormal face_normal_raw(const TriangleMesh& mesh, int face) {
  const auto& f = mesh.faces[face];
  FaceNormal out;
  out.u = mesh.vertices[f[1]] - mesh.vertices[f[0]];
  out.w = mesh.vertices[f[2]] - mesh.vertices[f[0]];
  const Vec3 n = out.u.cross(out.w);
  out.n_len = n.norm();
  if (out.n_len < 2e-12)
    throw DegenerateFace("face " + std::to_string(face) + " degenerate during energy eval");
  out.n_hat = n / out.n_len;
  return out;
}

double wrap_angle(double a) { return std::atan2(std::sin(a), std::cos(a)); }

}  // namespace

EnergyGrad bending_energy(const TriangleMesh& mesh, const Topology& topology,
                          bool with_grad, const std::vector<double>* pair_scale) {
  EnergyGrad out;
  if (with_grad) out.init_grad(mesh.vertices.size());
  std::vector<double> terms;
  terms.reserve(topology.dihedral_pairs.size());

  for (size_t pi = 0; pi < topology.dihedral_pairs.size(); ++pi) {
    const auto& pair = topology.dihedral_pairs[pi];
    const double scale = pair_scale ? (*pair_scale)[pi] : 1.0;
    const FaceNormal na = face_normal_raw(mesh, pair.face_a);
    const FaceNormal nb = face_normal_raw(mesh, pair.face_b);
    const Vec3 e = mesh.vertices[pair.edge_v1] - mesh.vertices[pair.edge_v0];
    const double e_len = e.norm();
    if (e_len < 1e-12) throw DegenerateFace("collapsed shared edge");
    const Vec3 e_hat = e / e_len;

    const double s = na.n_hat.cross(nb.n_hat).dot(e_hat);
    const double c = na.n_hat.dot(nb.n_hat);
    const double theta = std::atan2(s, c);
    const double dev = wrap_angle(theta - pair.rest_angle);
    const double weight =
        scale * pair.rest_edge_length * pair.rest_edge_length / pair.rest_area_sum;
    terms.push_back(weight * dev * dev);

    if (!with_grad) continue;
    // d(theta) = c ds - s dc with s^2 + c^2 = 1 (both normals are
    // perpendicular to the shared edge).
    const double d_theta = 2.0 * weight * dev;
    const Vec3 g_na = d_theta * (c * nb.n_hat.cross(e_hat) - s * nb.n_hat);
    const Vec3 g_nb = d_theta * (c * e_hat.cross(na.n_hat) - s * na.n_hat);
    const Vec3 g_e = d_theta * c * na.n_hat.cross(nb.n_hat);

    auto& grad = out.grad;
    const auto& fa = mesh.faces[pair.face_a];
    const auto& fb = mesh.faces[pair.face_b];
    Vec3 ga0 = Vec3::Zero(), ga1 = Vec3::Zero(), ga2 = Vec3::Zero();
    scatter_normal_grad(g_na, na.n_hat, na.n_len, na.u, na.w, ga0, ga1, ga2);
    grad[fa[0]] += ga0;
    grad[fa[1]] += ga1;
    grad[fa[2]] += ga2;
    Vec3 gb0 = Vec3::Zero(), gb1 = Vec3::Zero(), gb2 = Vec3::Zero();
    scatter_normal_grad(g_nb, nb.n_hat, nb.n_len, nb.u, nb.w, gb0, gb1, gb2);
    grad[fb[0]] += gb0;
    grad[fb[1]] += gb1;
    grad[fb[2]] += gb2;
    const Vec3 he = (g_e - e_hat * e_hat.dot(g_e)) / e_len;
    grad[pair.edge_v1] += he;
    grad[pair.edge_v0] -= he;
  }
  out.value = pairwise_sum(terms);
  return out;
}

EnergyGrad strain_energy(const TriangleMesh& mesh, const std::vector<FaceRestState>& rest,
                         const MaterialParams& material, bool with_grad,
                         const std::vector<double>* lambda_scale,
                         const std::vector<double>* mu_scale) {
  material.validate();
  if (rest.size() != mesh.faces.size())
    throw MissingRestState("rest state count does not match face count");
  EnergyGrad out;
  if (with_grad) out.init_grad(mesh.vertices.size());
  std::vector<double> terms(mesh.faces.size());

  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    const double lambda = material.lame_lambda * (lambda_scale ? (*lambda_scale)[i] : 1.0);
    const double mu = material.lame_mu * (mu_scale ? (*mu_scale)[i] : 1.0);
    Mat32 edges;
    edges.col(0) = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    edges.col(1) = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    const Mat32 F = edges * rest[i].inv_rest_edges;
    const Mat2 G = 0.5 * (F.transpose() * F - Mat2::Identity());
    const double tr_g = G.trace();
    const double tr_g2 = (G * G).trace();
    const double volume = rest[i].rest_area * rest[i].thickness;
    terms[i] = volume * (0.5 * lambda * tr_g * tr_g + mu * tr_g2);

    if (!with_grad) continue;
    const Mat2 stress = lambda * tr_g * Mat2::Identity() + 2.0 * mu * G;
    const Mat32 dE_dD = volume * (F * stress) * rest[i].inv_rest_edges.transpose();
    out.grad[f[1]] += dE_dD.col(0);
    out.grad[f[2]] += dE_dD.col(1);
    out.grad[f[0]] -= dE_dD.col(0) + dE_dD.col(1);
  }
  out.value = pairwise_sum(terms);
  return out;
}

uint64_t position_hash(const std::vector<Vec3>& positions) {
  return fnv1a(positions.data(), positions.size() * sizeof(Vec3));
}

CollisionSet build_collision_set(const TriangleMesh& garment, const TriangleMesh& body) {
  const TriangleBvh bvh(body);
  return build_collision_set(garment, body, bvh);
}

CollisionSet build_collision_set(const TriangleMesh& garment, const TriangleMesh& body,
                                 const TriangleBvh& body_bvh) {
  CollisionSet set;
  set.entries.resize(garment.vertices.size());
  for (size_t i = 0; i < garment.vertices.size(); ++i) {
    const auto res = body_bvh.closest_point(garment.vertices[i]);
    CollisionEntry e;
    e.body_face = res.face;
    e.witness = res.point;
    e.normal = res.normal;
    e.signed_distance = (garment.vertices[i] - res.point).dot(res.normal);
    set.entries[i] = e;
  }
  set.garment_hash = position_hash(garment.vertices);
  set.body_hash = position_hash(body.vertices);
  return set;
}

EnergyGrad body_penetration_energy(const TriangleMesh& garment,
                                   const CollisionSet& collisions, double eps_body,
                                   bool with_grad) {
  if (collisions.entries.size() != garment.vertices.size() ||
      collisions.garment_hash != position_hash(garment.vertices))
    throw StaleCollisionSet("collision set does not match current garment positions");
  EnergyGrad out;
  if (with_grad) out.init_grad(garment.vertices.size());
  std::vector<double> terms(collisions.entries.size(), 0.0);
  for (size_t i = 0; i < collisions.entries.size(); ++i) {
    const auto& e = collisions.entries[i];
    if (e.body_face < 0) continue;
    // Witness and normal are held fixed per evaluation.
    const double d = (garment.vertices[i] - e.witness).dot(e.normal);
    const double pen = eps_body - d;
    if (pen <= 0.0) continue;
    terms[i] = pen * pen * pen;
    if (with_grad) out.grad[i] -= 3.0 * pen * pen * e.normal;
  }
  out.value = pairwise_sum(terms);
  return out;
}

std::vector<VirtualEdge> build_virtual_edges(const TriangleMesh& rest_mesh,
                                             double parallel_tol_deg) {
  TriangleMesh rest = rest_mesh;
  rest.vertices = rest_mesh.rest();
  rest.rest_positions.clear();
  const TriangleBvh bvh(rest);
  const double cos_tol = -std::cos(parallel_tol_deg * M_PI / 180.0);

  std::vector<VirtualEdge> edges;
  std::set<std::array<int64_t, 6>> seen;
  const Vec3 centroid_bary(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
  for (size_t face = 0; face < rest.faces.size(); ++face) {
    const Vec3 origin = rest.face_centroid(static_cast<int>(face));
    const Vec3 normal = rest.face_normal(static_cast<int>(face));
    RayHit hit;
    if (!bvh.raycast(origin, -normal, 1e-7, std::numeric_limits<double>::infinity(), hit,
                     static_cast<int>(face)))
      continue;
    const Vec3 hit_normal = rest.face_normal(hit.face);
    if (normal.dot(hit_normal) > cos_tol) continue;  // not opposite enough

    VirtualEdge ve;
    ve.face_a = static_cast<int>(face);
    ve.face_b = hit.face;
    ve.anchor_a = SurfacePoint{ve.face_a, centroid_bary};
    ve.anchor_b = SurfacePoint{ve.face_b, hit.bary};
    ve.rest_length = (hit.point - origin).norm();
    if (ve.rest_length <= 0.0) continue;

    auto quantize = [](double v) { return static_cast<int64_t>(std::llround(v * 1e9)); };
    std::array<int64_t, 3> key_a{ve.face_a, quantize(ve.anchor_a.bary[0]),
                                 quantize(ve.anchor_a.bary[1])};
    std::array<int64_t, 3> key_b{ve.face_b, quantize(ve.anchor_b.bary[0]),
                                 quantize(ve.anchor_b.bary[1])};
    if (key_b < key_a) std::swap(key_a, key_b);
    std::array<int64_t, 6> key{key_a[0], key_a[1], key_a[2], key_b[0], key_b[1], key_b[2]};
    if (!seen.insert(key).second) continue;
    edges.push_back(ve);
  }
  return edges;
}

EnergyGrad virtual_edge_energy(const TriangleMesh& mesh,
                               const std::vector<VirtualEdge>& ves, bool with_grad) {
  EnergyGrad out;
  if (with_grad) out.init_grad(mesh.vertices.size());
  std::vector<double> terms(ves.size(), 0.0);
  for (size_t i = 0; i < ves.size(); ++i) {
    const auto& ve = ves[i];
    const Vec3 pa = surface_point_position(mesh, ve.anchor_a);
    const Vec3 pb = surface_point_position(mesh, ve.anchor_b);
    const double len = (pa - pb).norm();
    const double slack = ve.rest_length - len;
    if (slack <= 0.0) continue;
    terms[i] = slack * slack;
    if (!with_grad || len < 1e-12) continue;
    const Vec3 dir = (pa - pb) / len;
    const Vec3 g = -2.0 * slack * dir;  // dE/d(pa); pb gets the negative
    const auto& fa = mesh.faces[ve.face_a];
    const auto& fb = mesh.faces[ve.face_b];
    for (int k = 0; k < 3; ++k) {
      out.grad[fa[k]] += ve.anchor_a.bary[k] * g;
      out.grad[fb[k]] -= ve.anchor_b.bary[k] * g;
    }
  }
  out.value = pairwise_sum(terms);
  return out;
}

RegularizerResult gaussian_regularizers(const GaussianTexture& texture, double eps_pos,
                                        double eps_scale, bool with_grad) {
  RegularizerResult out;
  const size_t n = texture.data.size();
  std::vector<double> pos_terms, scale_terms;
  pos_terms.reserve(n);
  scale_terms.reserve(n);
  // First pass: excess magnitudes.
  for (size_t i = 0; i < n; ++i) {
    if (!texture.valid[i]) continue;
    const auto& t = texture.data[i];
    pos_terms.push_back(std::pow(std::max(t.offset.norm() - eps_pos, 0.0), 2));
    const Vec3 s = t.scale();
    for (int k = 0; k < 3; ++k)
      scale_terms.push_back(std::pow(std::max(s[k] - eps_scale, 0.0), 2));
  }
  out.pos_value = std::sqrt(pairwise_sum(pos_terms));
  out.scale_value = std::sqrt(pairwise_sum(scale_terms));
  if (!with_grad) return out;

  out.d_offset.assign(n, Vec3::Zero());
  out.d_log_scale.assign(n, Vec3::Zero());
  for (size_t i = 0; i < n; ++i) {
    if (!texture.valid[i]) continue;
    const auto& t = texture.data[i];
    const double mu_norm = t.offset.norm();
    if (out.pos_value > 1e-12 && mu_norm > eps_pos && mu_norm > 1e-12)
      out.d_offset[i] = ((mu_norm - eps_pos) / out.pos_value) * (t.offset / mu_norm);
    const Vec3 s = t.scale();
    for (int k = 0; k < 3; ++k) {
      const double excess = s[k] - eps_scale;
      if (out.scale_value > 1e-12 && excess > 0.0)
        out.d_log_scale[i][k] = (excess / out.scale_value) * s[k];
    }
  }
  return out;
}

}  // namespace ggf
