#include "lrva/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lrva/rng.hpp"

namespace lrva {

Image Image::blank(int height, int width, std::uint8_t fill) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("image: non-positive size");
  Image img;
  img.height = height;
  img.width = width;
  img.pixels.assign(static_cast<std::size_t>(height) * width * 3, fill);
  return img;
}

std::uint8_t& Image::at(int y, int x, int c) {
  return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
}

std::uint8_t Image::at(int y, int x, int c) const {
  return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
}

void write_png(const Image& image, const std::filesystem::path& path) {
  if (image.pixels.size() != static_cast<std::size_t>(image.height) * image.width * 3) {
    throw std::invalid_argument("image: pixel buffer size mismatch");
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw std::runtime_error("image: PNG write failed for " + path.string() + ": " + png.message);
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw std::runtime_error("image: PNG open failed for " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image img = Image::blank(static_cast<int>(png.height), static_cast<int>(png.width));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    throw std::runtime_error("image: PNG read failed for " + path.string() + ": " + png.message);
  }
  return img;
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (height == image.height && width == image.width) return image;
  Image out = Image::blank(height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(static_cast<int>(fy), image.height - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const int x0 = std::min(static_cast<int>(fx), image.width - 1);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
        const double bot = (1.0 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround((1.0 - wy) * top + wy * bot));
      }
    }
  }
  return out;
}

Tensor image_to_tensor(const Image& image) {
  const int H = image.height, W = image.width;
  std::vector<double> data(static_cast<std::size_t>(3) * H * W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) {
        data[(static_cast<std::size_t>(c) * H + y) * W + x] = image.at(y, x, c) / 255.0;
      }
    }
  }
  return Tensor::from_data({3, H, W}, std::move(data));
}

Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw std::invalid_argument("image: tensor must be [3,H,W]");
  const int H = t.dim(1), W = t.dim(2);
  Image img = Image::blank(H, W);
  const double* data = t.data();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(data[(static_cast<std::size_t>(c) * H + y) * W + x], 0.0, 1.0);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

std::uint64_t image_hash(const Image& image) {
  std::uint64_t h = fnv1a_bytes(&image.height, sizeof(image.height));
  h = fnv1a_bytes(&image.width, sizeof(image.width), h);
  return fnv1a_bytes(image.pixels.data(), image.pixels.size(), h);
}

}  // namespace lrva
