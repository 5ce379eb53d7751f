#pragma once

#include "ggf/texture.hpp"

namespace ggf {

// Degree-3 real spherical harmonics (16 terms). Color decode is
// clamp(eval + 0.5, 0, 1); the +0.5 offset keeps all-zero coefficients at
// mid-gray.
Vec3 evaluate_sh(const ShCoeffs& coeffs, const Vec3& dir);

// Backward companion. dL_dcolor is w.r.t. the decoded (clamped) color;
// entries clamped in the forward pass receive zero gradient. d_dir is the
// gradient w.r.t. the (unit) direction, before any normalization chain.
void evaluate_sh_backward(const ShCoeffs& coeffs, const Vec3& dir, const Vec3& dL_dcolor,
                          ShCoeffs& d_coeffs, Vec3& d_dir);

}  // namespace ggf
