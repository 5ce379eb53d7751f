#include "ggf/loss.hpp"

#include <cmath>
#include <vector>

namespace ggf {

namespace {

constexpr double kC1 = 0.01 * 0.01;  // (K1 L)^2
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window(int size, double sigma = 1.5) {
  std::vector<double> w(static_cast<size_t>(size) * size);
  const int r = size / 2;
  double sum = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double v = std::exp(-((x - r) * (x - r) + (y - r) * (y - r)) / (2.0 * sigma * sigma));
      w[static_cast<size_t>(y) * size + x] = v;
      sum += v;
    }
  for (auto& v : w) v /= sum;
  return w;
}

int window_size_for(const ImageF& img) {
  int size = 11;
  const int limit = std::min(img.width, img.height);
  if (limit < size) size = limit % 2 == 1 ? limit : limit - 1;
  if (size < 1) throw ShapeMismatch("image too small for SSIM");
  return size;
}

struct SsimScratch {
  int size = 0;                 // window
  int mw = 0, mh = 0;           // valid map dims
  std::vector<double> window;
};

// SSIM over one channel plane; optionally scatters the gradient w.r.t. x.
// map_select (when given) limits the average to selected map pixels.
double ssim_channel(const ImageF& x, const ImageF& y, int c, const SsimScratch& s,
                    const std::vector<uint8_t>* map_select, size_t* selected_count,
                    ImageF* dx, double upstream) {
  const int size = s.size;
  double total = 0.0;
  size_t count = 0;
  for (int my = 0; my < s.mh; ++my) {
    for (int mx = 0; mx < s.mw; ++mx) {
      if (map_select && !(*map_select)[static_cast<size_t>(my) * s.mw + mx]) continue;
      double mu_x = 0, mu_y = 0, xx = 0, yy = 0, xy = 0;
      for (int wy = 0; wy < size; ++wy)
        for (int wx = 0; wx < size; ++wx) {
          const double w = s.window[static_cast<size_t>(wy) * size + wx];
          const double xv = x.at(mx + wx, my + wy, c);
          const double yv = y.at(mx + wx, my + wy, c);
          mu_x += w * xv;
          mu_y += w * yv;
          xx += w * xv * xv;
          yy += w * yv * yv;
          xy += w * xv * yv;
        }
      const double sx = xx - mu_x * mu_x;
      const double sy = yy - mu_y * mu_y;
      const double sxy = xy - mu_x * mu_y;
      const double a1 = 2.0 * mu_x * mu_y + kC1;
      const double a2 = 2.0 * sxy + kC2;
      const double b1 = mu_x * mu_x + mu_y * mu_y + kC1;
      const double b2 = sx + sy + kC2;
      const double ssim_px = (a1 * a2) / (b1 * b2);
      total += ssim_px;
      ++count;

      if (!dx) continue;
      // Partials w.r.t. the window statistics (mu_x, xx, xy).
      const double inv = 1.0 / (b1 * b2);
      const double d_sx = -a1 * a2 * inv / b2;       // dS/d(sigma_x^2)
      const double d_sxy = 2.0 * a1 * inv;           // dS/d(sigma_xy)
      const double d_mu = 2.0 * mu_y * a2 * inv - 2.0 * mu_x * a1 * a2 * inv / b1 -
                          2.0 * mu_x * d_sx - mu_y * d_sxy;
      for (int wy = 0; wy < size; ++wy)
        for (int wx = 0; wx < size; ++wx) {
          const double w = s.window[static_cast<size_t>(wy) * size + wx];
          const double xv = x.at(mx + wx, my + wy, c);
          const double yv = y.at(mx + wx, my + wy, c);
          dx->at(mx + wx, my + wy, c) +=
              upstream * w * (d_mu + d_sx * 2.0 * xv + d_sxy * yv);
        }
    }
  }
  if (selected_count) *selected_count = count;
  return total;
}

}  // namespace

double ssim(const ImageF& a, const ImageF& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("SSIM inputs differ in shape");
  SsimScratch s;
  s.size = window_size_for(a);
  s.window = gaussian_window(s.size);
  s.mw = a.width - s.size + 1;
  s.mh = a.height - s.size + 1;
  double total = 0.0;
  size_t count = 0;
  for (int c = 0; c < a.channels; ++c) {
    size_t n = 0;
    total += ssim_channel(a, b, c, s, nullptr, &n, nullptr, 0.0);
    count += n;
  }
  return total / static_cast<double>(count);
}

LossResult rgb_loss(const ImageF& render, const ImageF& target, const ImageF* mask,
                    double lambda_rgb, bool with_grad) {
  if (!render.same_shape(target)) throw ShapeMismatch("render/target shapes differ");
  if (mask && (mask->width != render.width || mask->height != render.height))
    throw ShapeMismatch("mask shape differs from images");

  LossResult out;
  if (with_grad) out.d_render = ImageF(render.width, render.height, render.channels);

  // Masked copies feed both terms; unmasked pixels are identically zero in
  // both images and so contribute nothing.
  ImageF rm = render, tm = target;
  if (mask) {
    for (int y = 0; y < render.height; ++y)
      for (int x = 0; x < render.width; ++x) {
        const double m = mask->at(x, y, 0) > 0.5 ? 1.0 : 0.0;
        for (int c = 0; c < render.channels; ++c) {
          rm.at(x, y, c) *= m;
          tm.at(x, y, c) *= m;
        }
      }
  }

  // L1 over masked pixels.
  double l1_sum = 0.0;
  size_t l1_count = 0;
  for (int y = 0; y < render.height; ++y)
    for (int x = 0; x < render.width; ++x) {
      if (mask && mask->at(x, y, 0) <= 0.5) continue;
      for (int c = 0; c < render.channels; ++c) {
        l1_sum += std::abs(rm.at(x, y, c) - tm.at(x, y, c));
        ++l1_count;
      }
    }
  out.l1 = l1_count > 0 ? l1_sum / static_cast<double>(l1_count) : 0.0;

  // SSIM map restricted to windows centered on masked pixels.
  SsimScratch s;
  s.size = window_size_for(render);
  s.window = gaussian_window(s.size);
  s.mw = render.width - s.size + 1;
  s.mh = render.height - s.size + 1;
  std::vector<uint8_t> select;
  const std::vector<uint8_t>* select_ptr = nullptr;
  if (mask) {
    const int r = s.size / 2;
    select.assign(static_cast<size_t>(s.mw) * s.mh, 0);
    for (int my = 0; my < s.mh; ++my)
      for (int mx = 0; mx < s.mw; ++mx)
        select[static_cast<size_t>(my) * s.mw + mx] =
            mask->at(mx + r, my + r, 0) > 0.5 ? 1 : 0;
    select_ptr = &select;
  }

  double ssim_total = 0.0;
  size_t ssim_count = 0;
  ImageF d_ssim;
  if (with_grad) d_ssim = ImageF(render.width, render.height, render.channels);
  // First pass for the count (the gradient scale needs it up front).
  for (int c = 0; c < render.channels; ++c) {
    size_t n = 0;
    ssim_total += ssim_channel(rm, tm, c, s, select_ptr, &n, nullptr, 0.0);
    ssim_count += n;
  }
  const double mean_ssim =
      ssim_count > 0 ? ssim_total / static_cast<double>(ssim_count) : 1.0;
  out.ssim_loss = 1.0 - mean_ssim;
  if (with_grad && ssim_count > 0) {
    const double upstream = -1.0 / static_cast<double>(ssim_count);  // d(1-mean)/dS
    for (int c = 0; c < render.channels; ++c)
      ssim_channel(rm, tm, c, s, select_ptr, nullptr, &d_ssim, upstream);
  }

  out.value = lambda_rgb * out.l1 + (1.0 - lambda_rgb) * out.ssim_loss;

  if (with_grad) {
    const double l1_w =
        l1_count > 0 ? lambda_rgb / static_cast<double>(l1_count) : 0.0;
    for (int y = 0; y < render.height; ++y)
      for (int x = 0; x < render.width; ++x) {
        const double m = mask ? (mask->at(x, y, 0) > 0.5 ? 1.0 : 0.0) : 1.0;
        for (int c = 0; c < render.channels; ++c) {
          double g = (1.0 - lambda_rgb) * d_ssim.at(x, y, c);
          if (m > 0.0) {
            const double diff = rm.at(x, y, c) - tm.at(x, y, c);
            g += l1_w * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
          }
          out.d_render.at(x, y, c) = g * m;
        }
      }
  }
  return out;
}

}  // namespace ggf
