#include "hieum/image_io.hpp"

#include "hieum/error.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hieum {
namespace {

std::string lowercase_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

// Skips whitespace and '#' comments between PNM header tokens.
int read_pnm_int(std::istream& in, const std::filesystem::path& path) {
  int c = in.peek();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int value = -1;
  if (!(in >> value)) throw Error(ErrorCode::Io, "malformed PGM header in " + path.string());
  return value;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '2')) {
    throw Error(ErrorCode::Io, "not a PGM file: " + path.string());
  }
  GrayImage image;
  image.width = read_pnm_int(in, path);
  image.height = read_pnm_int(in, path);
  const int maxval = read_pnm_int(in, path);
  if (image.width < 1 || image.height < 1 || maxval < 1 || maxval > 255) {
    throw Error(ErrorCode::Io, "unsupported PGM geometry or depth in " + path.string());
  }
  const auto count = static_cast<std::size_t>(image.width) * image.height;
  image.pixels.resize(count);
  if (magic[1] == '5') {
    in.get();  // single whitespace after maxval
    in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) {
      throw Error(ErrorCode::Io, "truncated PGM " + path.string());
    }
  } else {
    for (auto& p : image.pixels) p = static_cast<std::uint8_t>(read_pnm_int(in, path));
  }
  if (maxval != 255) {
    for (auto& p : image.pixels) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
  }
  return image;
}

GrayImage read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw Error(ErrorCode::Io, "cannot read PNG " + path.string() + ": " + png.message);
  }
  GrayImage image;
  image.width = static_cast<int>(png.width);
  image.height = static_cast<int>(png.height);
  const auto count = static_cast<std::size_t>(png.width) * png.height;
  if ((png.format & PNG_FORMAT_FLAG_COLOR) == 0) {
    png.format = PNG_FORMAT_GRAY;
    image.pixels.resize(count);
    if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
      throw Error(ErrorCode::Io, "cannot decode PNG " + path.string() + ": " + png.message);
    }
    return image;
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(count * 3);
  if (!png_image_finish_read(&png, nullptr, rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, "cannot decode PNG " + path.string() + ": " + png.message);
  }
  image.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double luma = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    image.pixels[i] = static_cast<std::uint8_t>(std::min(255.0, std::round(luma)));
  }
  return image;
}

void write_png_raw(const std::filesystem::path& path, int width, int height, png_uint_32 format,
                   const std::uint8_t* data) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width);
  png.height = static_cast<png_uint_32>(height);
  png.format = format;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, data, 0, nullptr)) {
    throw Error(ErrorCode::Io, "cannot write PNG " + path.string() + ": " + png.message);
  }
}

}  // namespace

RgbImage read_rgb_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw Error(ErrorCode::Io, "cannot read PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  RgbImage image{static_cast<int>(png.height), static_cast<int>(png.width),
                 std::vector<std::uint8_t>(static_cast<std::size_t>(png.width) * png.height * 3)};
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::Io, "cannot decode PNG " + path.string() + ": " + png.message);
  }
  return image;
}

GrayImage read_gray_image(const std::filesystem::path& path) {
  const auto ext = lowercase_extension(path);
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png(path);
  throw Error(ErrorCode::Io, "unsupported image type: " + path.string());
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  write_png_raw(path, image.width, image.height, PNG_FORMAT_GRAY, image.pixels.data());
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  write_png_raw(path, image.width, image.height, PNG_FORMAT_RGB, image.pixels.data());
}

}  // namespace hieum
