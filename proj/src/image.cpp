#include "ggf/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace ggf {

ImageF load_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw Error("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error("failed to decode PNG " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int channels = static_cast<int>(png_get_channels(png, info));

  ImageF img(width, height, channels);
  std::vector<png_byte> row(png_get_rowbytes(png, info));
  for (int y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(x, y, c) = row[x * channels + c] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

void save_png(const ImageF& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3)
    throw ShapeMismatch("PNG writer supports 1 or 3 channels");
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error("failed to encode PNG " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<size_t>(image.width) * image.channels);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) {
        const double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
        row[x * image.channels + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

ImageF load_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string magic;
  int width, height;
  double scale;
  in >> magic >> width >> height >> scale;
  in.get();  // single whitespace before the payload
  if (magic != "PF" && magic != "Pf") throw Error(path + " is not a PFM file");
  if (scale > 0) throw Error("big-endian PFM not supported: " + path);
  const int channels = magic == "PF" ? 3 : 1;
  ImageF img(width, height, channels);
  std::vector<float> row(static_cast<size_t>(width) * channels);
  for (int y = height - 1; y >= 0; --y) {  // PFM rows run bottom-to-top
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw Error("truncated PFM " + path);
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) img.at(x, y, c) = row[x * channels + c];
  }
  return img;
}

void save_pfm(const ImageF& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3)
    throw ShapeMismatch("PFM writer supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << (image.channels == 3 ? "PF" : "Pf") << "\n"
      << image.width << " " << image.height << "\n-1.0\n";
  std::vector<float> row(static_cast<size_t>(image.width) * image.channels);
  for (int y = image.height - 1; y >= 0; --y) {
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c)
        row[x * image.channels + c] = static_cast<float>(image.at(x, y, c));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

}  // namespace ggf
