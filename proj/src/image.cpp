#include "outfitrec/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "outfitrec/error.hpp"

namespace outfitrec {

namespace {

struct PngImage {
  png_image image;

  PngImage() {
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> decode_raw(std::span<const std::uint8_t> bytes,
                                     png_uint_32 format, int channels,
                                     int& width, int& height,
                                     const ImageLimits& limits) {
  PngImage png;
  if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
    throw ParseError(std::string("png decode: ") + png.image.message);
  }
  const std::int64_t pixels =
      std::int64_t(png.image.width) * std::int64_t(png.image.height);
  if (pixels <= 0 || pixels > limits.max_pixels) {
    throw DimensionError("png dimensions " + std::to_string(png.image.width) +
                         "x" + std::to_string(png.image.height) +
                         " exceed the decode limit");
  }
  png.image.format = format;
  std::vector<std::uint8_t> raw(std::size_t(pixels) * channels);
  if (!png_image_finish_read(&png.image, nullptr, raw.data(), 0, nullptr)) {
    throw ParseError(std::string("png decode: ") + png.image.message);
  }
  width = int(png.image.width);
  height = int(png.image.height);
  return raw;
}

std::vector<std::uint8_t> encode_raw(const std::uint8_t* data, int width,
                                     int height, png_uint_32 format) {
  PngImage png;
  png.image.width = png_uint_32(width);
  png.image.height = png_uint_32(height);
  png.image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, data, 0,
                                 nullptr)) {
    throw IoError(std::string("png encode: ") + png.image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png.image, out.data(), &size, 0, data, 0,
                                 nullptr)) {
    throw IoError(std::string("png encode: ") + png.image.message);
  }
  out.resize(size);
  return out;
}

void write_file(const std::vector<std::uint8_t>& bytes,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
}

}  // namespace

GarmentImage::GarmentImage(int w, int h, Rgb fill, std::string id)
    : width(w), height(h), pixels(std::size_t(w) * std::size_t(h), fill),
      source_id(std::move(id)) {}

void GarmentImage::validate() const {
  if (width < 0 || height < 0 ||
      pixels.size() != std::size_t(width) * std::size_t(height)) {
    throw DimensionError("image '" + source_id + "': pixel count does not match " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
  if (mask && mask->size() != pixels.size()) {
    throw DimensionError("image '" + source_id +
                         "': mask dimensions differ from pixel dimensions");
  }
}

GarmentImage decode_png(std::span<const std::uint8_t> bytes,
                        const ImageLimits& limits) {
  GarmentImage img;
  auto raw = decode_raw(bytes, PNG_FORMAT_RGB, 3, img.width, img.height, limits);
  img.pixels.resize(raw.size() / 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = Rgb{raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
  }
  return img;
}

GarmentImage read_png(const std::filesystem::path& path,
                      const ImageLimits& limits) {
  auto bytes = read_file(path);
  GarmentImage img = decode_png(bytes, limits);
  img.source_id = path.stem().string();
  return img;
}

std::vector<std::uint8_t> read_mask_png(const std::filesystem::path& path,
                                        int expected_width,
                                        int expected_height) {
  auto bytes = read_file(path);
  int w = 0;
  int h = 0;
  auto raw = decode_raw(bytes, PNG_FORMAT_GRAY, 1, w, h, ImageLimits{});
  if (w != expected_width || h != expected_height) {
    throw DimensionError("mask " + path.filename().string() +
                         " has different dimensions from its image");
  }
  for (auto& v : raw) v = v != 0 ? 1 : 0;
  return raw;
}

std::vector<std::uint8_t> encode_png(const GarmentImage& image) {
  image.validate();
  std::vector<std::uint8_t> raw(image.pixels.size() * 3);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    raw[3 * i] = image.pixels[i].r;
    raw[3 * i + 1] = image.pixels[i].g;
    raw[3 * i + 2] = image.pixels[i].b;
  }
  return encode_raw(raw.data(), image.width, image.height, PNG_FORMAT_RGB);
}

void write_png(const GarmentImage& image, const std::filesystem::path& path) {
  write_file(encode_png(image), path);
}

void write_mask_png(std::span<const std::uint8_t> mask, int width, int height,
                    const std::filesystem::path& path) {
  std::vector<std::uint8_t> raw(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) raw[i] = mask[i] ? 255 : 0;
  write_file(encode_raw(raw.data(), width, height, PNG_FORMAT_GRAY), path);
}

GarmentImage load_garment(const std::filesystem::path& image_path,
                          const std::optional<std::filesystem::path>& mask_path,
                          std::string source_id, const ImageLimits& limits) {
  GarmentImage img = read_png(image_path, limits);
  if (!source_id.empty()) img.source_id = std::move(source_id);
  if (mask_path) img.mask = read_mask_png(*mask_path, img.width, img.height);
  return img;
}

}  // namespace outfitrec
