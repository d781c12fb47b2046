#include "histotile/raster.hpp"

#include <algorithm>
#include <string>

#include "histotile/error.hpp"

namespace histotile {

Raster::Raster(int width, int height, int channels)
    : Raster(width, height, channels,
             std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                       static_cast<std::size_t>(std::max(height, 0)) *
                                       static_cast<std::size_t>(std::max(channels, 0)))) {}

Raster::Raster(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw Error("raster dimensions must be positive");
  if (channels != 1 && channels != 3) throw Error("raster must have 1 or 3 channels");
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    throw Error("raster data length " + std::to_string(data_.size()) +
                " does not match " + std::to_string(width) + "x" + std::to_string(height) +
                "x" + std::to_string(channels));
  }
}

Raster Raster::channel(int c) const {
  if (c < 0 || c >= channels_) throw Error("channel index out of range");
  std::vector<std::uint8_t> out(pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = data_[i * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)];
  }
  return Raster(width_, height_, 1, std::move(out));
}

Raster Raster::crop(int x, int y, int width, int height) const {
  if (x < 0 || y < 0 || width <= 0 || height <= 0 || x + width > width_ ||
      y + height > height_) {
    throw Error("crop rectangle outside the raster");
  }
  Raster out(width, height, channels_);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels_);
  for (int r = 0; r < height; ++r) {
    const auto* src = &data_[index(x, y + r, 0)];
    std::copy(src, src + row_bytes, &out.at(0, r, 0));
  }
  return out;
}

BinaryMask::BinaryMask(int width, int height)
    : width_(width),
      height_(height),
      bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
  if (width <= 0 || height <= 0) throw Error("mask dimensions must be positive");
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::complement() const {
  BinaryMask out(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] ? 0 : 1;
  return out;
}

}  // namespace histotile
