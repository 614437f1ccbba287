#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lrva/tensor.hpp"

namespace lrva {

// 8-bit RGB image, row-major interleaved (y, x, channel). Datasets and the
// augmentation store keep images in this form; conversion to f64 tensors
// happens at batch time so PNG round-trips are exact.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // size = height * width * 3

  static Image blank(int height, int width, std::uint8_t fill = 0);
  std::uint8_t& at(int y, int x, int c);
  std::uint8_t at(int y, int x, int c) const;
};

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

Image resize_bilinear(const Image& image, int height, int width);

// [3, H, W] tensor scaled to [0, 1].
Tensor image_to_tensor(const Image& image);
// Inverse of image_to_tensor with clamping and round-to-nearest.
Image tensor_to_image(const Tensor& t);

std::uint64_t image_hash(const Image& image);

}  // namespace lrva
