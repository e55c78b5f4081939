#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hieum {

struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB
};

// Reads binary (P5) or ASCII (P2) 8-bit PGM, or PNG of any 8-bit color type.
// Color PNGs are reduced to gray with luma weights 0.299/0.587/0.114.
GrayImage read_gray_image(const std::filesystem::path& path);
RgbImage read_rgb_png(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const GrayImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace hieum
