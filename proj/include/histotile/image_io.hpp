#pragma once

#include <filesystem>
#include <optional>

#include "histotile/raster.hpp"

namespace histotile {

enum class ImageCodec { png, tiff };

struct ImageInfo {
  ImageCodec codec = ImageCodec::png;
  int width = 0;
  int height = 0;
  int channels = 0;
};

/// Reads only the header. Returns nullopt for files that are not a supported
/// PNG or uncompressed 8-bit TIFF.
std::optional<ImageInfo> probe_image(const std::filesystem::path& path);

/// Decodes to 8-bit RGB (grayscale sources are expanded, alpha is dropped).
Raster read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Raster& image);
/// Baseline uncompressed TIFF, single strip, chunky samples.
void write_tiff(const std::filesystem::path& path, const Raster& image);

}  // namespace histotile
