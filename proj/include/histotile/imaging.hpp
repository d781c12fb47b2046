#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "histotile/raster.hpp"
#include "histotile/types.hpp"

namespace histotile {

inline constexpr int kPatchSide = 150;

struct TileOrigin {
  int x = 0;
  int y = 0;
  int col = 0;
  int row = 0;

  bool operator==(const TileOrigin&) const = default;
};

/// Provenance shared by every patch of one source image.
struct PatchSource {
  std::string patient_id;
  std::string image_id;
  int magnification = 0;
  BinaryLabel label = BinaryLabel::benign;
};

struct PatchRecord {
  Raster pixels;
  TileOrigin origin;
  PatchSource source;

  Provenance provenance() const {
    return {source.patient_id, source.image_id, origin.col, origin.row};
  }
};

/// Offsets of an evenly spaced n-tile layout spanning `extent` pixels:
/// n = round(extent / side) (at least 1), offset_i = round(i * (extent - side) / (n - 1)).
/// Rounding is half-up in integer arithmetic.
std::vector<int> tile_offsets(int extent, int side = kPatchSide);

/// Row-major grid of tile origins. Throws if the image is smaller than one tile.
std::vector<TileOrigin> tile_grid(int width, int height, int side = kPatchSide);

std::vector<PatchRecord> tessellate(const Raster& image, const PatchSource& source,
                                    int side = kPatchSide);

/// gray = round(0.299 R + 0.587 G + 0.114 B).
Raster to_grayscale(const Raster& rgb);

using Histogram256 = std::array<std::uint64_t, 256>;

Histogram256 histogram(const Raster& channel);

/// Threshold T maximizing the between-class variance of {<= T} vs {> T}; smallest T on ties.
/// Constant images give T = 0.
std::uint8_t otsu_threshold(const Histogram256& hist);
std::uint8_t otsu_threshold(const Raster& channel);

/// Bit set iff low <= value <= high.
BinaryMask binarize(const Raster& channel, std::uint8_t low, std::uint8_t high);

}  // namespace histotile
