#include <doctest.h>

#include "ggf/loss.hpp"
#include "ggf/rng.hpp"

using namespace ggf;

namespace {

// Independent SSIM reference: direct nested loops, no shared code with the
// library implementation beyond the stated constants.
double reference_ssim(const ImageF& x, const ImageF& y) {
  const int size = 11;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double kernel[11][11];
  double ksum = 0.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      kernel[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) /
                              (2.0 * sigma * sigma));
      ksum += kernel[i][j];
    }
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) kernel[i][j] /= ksum;

  double total = 0.0;
  size_t count = 0;
  for (int c = 0; c < x.channels; ++c)
    for (int my = 0; my + size <= x.height; ++my)
      for (int mx = 0; mx + size <= x.width; ++mx) {
        double mx_mean = 0, my_mean = 0, xx = 0, yy = 0, xy = 0;
        for (int wy = 0; wy < size; ++wy)
          for (int wx = 0; wx < size; ++wx) {
            const double w = kernel[wy][wx];
            const double xv = x.at(mx + wx, my + wy, c);
            const double yv = y.at(mx + wx, my + wy, c);
            mx_mean += w * xv;
            my_mean += w * yv;
            xx += w * xv * xv;
            yy += w * yv * yv;
            xy += w * xv * yv;
          }
        const double sx = xx - mx_mean * mx_mean;
        const double sy = yy - my_mean * my_mean;
        const double sxy = xy - mx_mean * my_mean;
        total += ((2 * mx_mean * my_mean + c1) * (2 * sxy + c2)) /
                 ((mx_mean * mx_mean + my_mean * my_mean + c1) * (sx + sy + c2));
        ++count;
      }
  return total / static_cast<double>(count);
}

ImageF random_image(Rng& rng, int w, int h, int c = 3) {
  ImageF img(w, h, c);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("rgb_loss basics") {
  Rng rng(1);
  const ImageF a = random_image(rng, 24, 24);

  SUBCASE("identical images give zero loss and zero gradient") {
    const LossResult r = rgb_loss(a, a, nullptr, 0.8);
    CHECK(r.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.l1 == 0.0);
    CHECK(r.ssim_loss == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("constant offset matches the closed-form L1 plus reference SSIM") {
    ImageF x(24, 24, 3, 0.3), y(24, 24, 3, 0.5);
    const LossResult r = rgb_loss(x, y, nullptr, 0.8);
    CHECK(r.l1 == doctest::Approx(0.2).epsilon(1e-12));
    const double ref = 1.0 - reference_ssim(x, y);
    CHECK(r.ssim_loss == doctest::Approx(ref).epsilon(1e-9));
    CHECK(r.value == doctest::Approx(0.8 * 0.2 + 0.2 * ref).epsilon(1e-9));
  }

  SUBCASE("shape mismatch throws") {
    const ImageF b = random_image(rng, 12, 24);
    CHECK_THROWS_AS(rgb_loss(a, b, nullptr, 0.8), ShapeMismatch);
  }
}

TEST_CASE("rgb_loss gradient matches finite differences on random 16x16 pairs") {
  Rng rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    ImageF render = random_image(rng, 16, 16);
    const ImageF target = random_image(rng, 16, 16);
    ImageF mask;
    const ImageF* mask_ptr = nullptr;
    if (trial % 2 == 1) {
      mask = ImageF(16, 16, 1);
      for (auto& m : mask.data) m = rng.uniform() < 0.7 ? 1.0 : 0.0;
      mask_ptr = &mask;
    }
    const double lambda = trial % 2 == 0 ? 0.8 : 0.55;
    const LossResult r = rgb_loss(render, target, mask_ptr, lambda);

    const double step = 1e-6;
    double max_fd = 0.0, max_diff = 0.0;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        for (int c = 0; c < 3; ++c) {
          const double saved = render.at(x, y, c);
          render.at(x, y, c) = saved + step;
          const double plus = rgb_loss(render, target, mask_ptr, lambda, false).value;
          render.at(x, y, c) = saved - step;
          const double minus = rgb_loss(render, target, mask_ptr, lambda, false).value;
          render.at(x, y, c) = saved;
          const double fd = (plus - minus) / (2 * step);
          max_fd = std::max(max_fd, std::abs(fd));
          max_diff = std::max(max_diff, std::abs(fd - r.d_render.at(x, y, c)));
        }
    CHECK(max_diff / max_fd < 1e-4);
  }
}

TEST_CASE("masked pixels contribute nothing") {
  Rng rng(17);
  ImageF render = random_image(rng, 20, 20);
  const ImageF target = random_image(rng, 20, 20);
  ImageF mask(20, 20, 1, 0.0);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 15; ++x) mask.at(x, y, 0) = 1.0;

  const LossResult before = rgb_loss(render, target, &mask, 0.8);
  // Changing pixels outside the mask leaves the loss untouched and their
  // gradient at zero.
  for (int x = 0; x < 20; ++x) render.at(x, 0, 0) = 0.0;
  const LossResult after = rgb_loss(render, target, &mask, 0.8);
  CHECK(before.value == doctest::Approx(after.value).epsilon(1e-14));
  for (int x = 0; x < 20; ++x) CHECK(before.d_render.at(x, 0, 0) == 0.0);
}

TEST_CASE("ssim matches the independent reference on random pairs") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 16 + 2 * trial;
    const ImageF a = random_image(rng, w, 20);
    const ImageF b = random_image(rng, w, 20);
    CHECK(ssim(a, b) == doctest::Approx(reference_ssim(a, b)).epsilon(1e-6));
  }
}
