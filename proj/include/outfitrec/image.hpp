#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "outfitrec/cis_data.hpp"

namespace outfitrec {

// Row-major RGB raster with an optional foreground mask (1 = foreground).
struct GarmentImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;
  std::optional<std::vector<std::uint8_t>> mask;
  std::string source_id;

  GarmentImage() = default;
  GarmentImage(int w, int h, Rgb fill = {}, std::string id = {});

  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }

  Rgb& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  const Rgb& at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }

  // Throws DimensionError when pixel or mask sizes disagree with width*height.
  void validate() const;

  friend bool operator==(const GarmentImage&, const GarmentImage&) = default;
};

struct ImageLimits {
  std::int64_t max_pixels = 16LL * 1024 * 1024;
};

GarmentImage read_png(const std::filesystem::path& path,
                      const ImageLimits& limits = {});
GarmentImage decode_png(std::span<const std::uint8_t> bytes,
                        const ImageLimits& limits = {});
// Reads a single-channel mask; any nonzero value is foreground.
std::vector<std::uint8_t> read_mask_png(const std::filesystem::path& path,
                                        int expected_width,
                                        int expected_height);

void write_png(const GarmentImage& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const GarmentImage& image);
void write_mask_png(std::span<const std::uint8_t> mask, int width, int height,
                    const std::filesystem::path& path);

// Loads an image plus an optional mask file.
GarmentImage load_garment(const std::filesystem::path& image_path,
                          const std::optional<std::filesystem::path>& mask_path,
                          std::string source_id = {},
                          const ImageLimits& limits = {});

}  // namespace outfitrec
