#include "ggf/sh.hpp"

namespace ggf {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

// Basis values and, optionally, their direction derivatives.
void sh_basis(const Vec3& d, double* b, Vec3* db) {
  const double x = d.x(), y = d.y(), z = d.z();
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, yz = y * z, xz = x * z;

  b[0] = kC0;
  b[1] = -kC1 * y;
  b[2] = kC1 * z;
  b[3] = -kC1 * x;
  b[4] = kC2[0] * xy;
  b[5] = kC2[1] * yz;
  b[6] = kC2[2] * (2.0 * zz - xx - yy);
  b[7] = kC2[3] * xz;
  b[8] = kC2[4] * (xx - yy);
  b[9] = kC3[0] * y * (3.0 * xx - yy);
  b[10] = kC3[1] * xy * z;
  b[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  b[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  b[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  b[14] = kC3[5] * z * (xx - yy);
  b[15] = kC3[6] * x * (xx - 3.0 * yy);
  if (!db) return;

  db[0] = Vec3::Zero();
  db[1] = Vec3(0, -kC1, 0);
  db[2] = Vec3(0, 0, kC1);
  db[3] = Vec3(-kC1, 0, 0);
  db[4] = kC2[0] * Vec3(y, x, 0);
  db[5] = kC2[1] * Vec3(0, z, y);
  db[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
  db[7] = kC2[3] * Vec3(z, 0, x);
  db[8] = kC2[4] * Vec3(2.0 * x, -2.0 * y, 0);
  db[9] = kC3[0] * Vec3(6.0 * xy, 3.0 * xx - 3.0 * yy, 0);
  db[10] = kC3[1] * Vec3(yz, xz, xy);
  db[11] = kC3[2] * Vec3(-2.0 * xy, 4.0 * zz - xx - 3.0 * yy, 8.0 * yz);
  db[12] = kC3[3] * Vec3(-6.0 * xz, -6.0 * yz, 6.0 * zz - 3.0 * xx - 3.0 * yy);
  db[13] = kC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * xy, 8.0 * xz);
  db[14] = kC3[5] * Vec3(2.0 * xz, -2.0 * yz, xx - yy);
  db[15] = kC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * xy, 0);
}

}  // namespace

Vec3 evaluate_sh(const ShCoeffs& coeffs, const Vec3& dir) {
  double b[kShTerms];
  sh_basis(dir, b, nullptr);
  Vec3 rgb = Vec3::Constant(0.5);
  for (int i = 0; i < kShTerms; ++i) rgb += b[i] * coeffs.row(i).transpose();
  return rgb.cwiseMax(0.0).cwiseMin(1.0);
}

void evaluate_sh_backward(const ShCoeffs& coeffs, const Vec3& dir, const Vec3& dL_dcolor,
                          ShCoeffs& d_coeffs, Vec3& d_dir) {
  double b[kShTerms];
  Vec3 db[kShTerms];
  sh_basis(dir, b, db);
  Vec3 raw = Vec3::Constant(0.5);
  for (int i = 0; i < kShTerms; ++i) raw += b[i] * coeffs.row(i).transpose();

  Vec3 g = dL_dcolor;
  for (int c = 0; c < 3; ++c)
    if (raw[c] <= 0.0 || raw[c] >= 1.0) g[c] = 0.0;  // clamped channels

  d_coeffs.setZero();
  d_dir.setZero();
  for (int i = 0; i < kShTerms; ++i) {
    d_coeffs.row(i) = b[i] * g.transpose();
    d_dir += db[i] * coeffs.row(i).dot(g);
  }
}

}  // namespace ggf
