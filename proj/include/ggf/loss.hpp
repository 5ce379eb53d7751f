#pragma once

#include "ggf/image.hpp"

namespace ggf {

// Mean SSIM between equal-shape images: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over the valid (unpadded)
// map and channels. The window shrinks to the largest odd size that fits
// when an image is smaller than 11 px.
double ssim(const ImageF& a, const ImageF& b);

struct LossResult {
  double value = 0.0;      // lambda * L1 + (1 - lambda) * (1 - SSIM)
  double l1 = 0.0;
  double ssim_loss = 0.0;  // 1 - SSIM
  ImageF d_render;         // gradient w.r.t. the render
};

// Photometric loss against a target. A mask (1-channel, {0,1}) gates both
// terms: images are masked before SSIM, the L1 mean runs over masked pixels,
// and SSIM windows are centered on masked pixels only; pixels outside the
// mask receive zero gradient.
LossResult rgb_loss(const ImageF& render, const ImageF& target, const ImageF* mask,
                    double lambda_rgb, bool with_grad = true);

}  // namespace ggf
