#include "histotile/imaging.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <string>

#include "histotile/error.hpp"

namespace histotile {

namespace {

// round(num / den) with halves rounded up, for num >= 0, den > 0.
int round_half_up(long long num, long long den) {
  return static_cast<int>((2 * num + den) / (2 * den));
}

}  // namespace

std::vector<int> tile_offsets(int extent, int side) {
  if (side <= 0) throw Error("tile side must be positive");
  if (extent < side) {
    throw Error("image extent " + std::to_string(extent) + " is smaller than the " +
                std::to_string(side) + " px patch");
  }
  const int n = std::max(1, round_half_up(extent, side));
  std::vector<int> offsets(static_cast<std::size_t>(n), 0);
  for (int i = 1; i < n; ++i) {
    offsets[static_cast<std::size_t>(i)] =
        round_half_up(static_cast<long long>(i) * (extent - side), n - 1);
  }
  return offsets;
}

std::vector<TileOrigin> tile_grid(int width, int height, int side) {
  const auto xs = tile_offsets(width, side);
  const auto ys = tile_offsets(height, side);
  std::vector<TileOrigin> grid;
  grid.reserve(xs.size() * ys.size());
  for (std::size_t r = 0; r < ys.size(); ++r) {
    for (std::size_t c = 0; c < xs.size(); ++c) {
      grid.push_back({xs[c], ys[r], static_cast<int>(c), static_cast<int>(r)});
    }
  }
  return grid;
}

std::vector<PatchRecord> tessellate(const Raster& image, const PatchSource& source, int side) {
  std::vector<PatchRecord> patches;
  for (const TileOrigin& origin : tile_grid(image.width(), image.height(), side)) {
    patches.push_back({image.crop(origin.x, origin.y, side, side), origin, source});
  }
  return patches;
}

Raster to_grayscale(const Raster& rgb) {
  if (rgb.channels() != 3) throw Error("to_grayscale expects an RGB raster");
  std::vector<std::uint8_t> out(rgb.pixel_count());
  const auto src = rgb.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    out[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return Raster(rgb.width(), rgb.height(), 1, std::move(out));
}

Histogram256 histogram(const Raster& channel) {
  if (channel.channels() != 1) throw Error("histogram expects a single-channel raster");
  Histogram256 hist{};
  for (std::uint8_t v : channel.data()) ++hist[v];
  return hist;
}

std::uint8_t otsu_threshold(const Histogram256& hist) {
  using boost::multiprecision::int256_t;

  std::uint64_t total = 0;
  std::uint64_t total_sum = 0;
  for (int v = 0; v < 256; ++v) {
    total += hist[static_cast<std::size_t>(v)];
    total_sum += hist[static_cast<std::size_t>(v)] * static_cast<std::uint64_t>(v);
  }
  if (total == 0) throw Error("otsu_threshold needs at least one pixel");

  // Between-class variance is proportional to (N*s0 - n0*S)^2 / (n0*n1); the
  // candidates are compared as exact fractions so ties are real ties.
  int best_t = 0;
  int256_t best_num = 0;
  int256_t best_den = 1;
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  for (int t = 0; t < 256; ++t) {
    n0 += hist[static_cast<std::size_t>(t)];
    s0 += hist[static_cast<std::size_t>(t)] * static_cast<std::uint64_t>(t);
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const int256_t diff = int256_t(total) * int256_t(s0) - int256_t(n0) * int256_t(total_sum);
    const int256_t num = diff * diff;
    const int256_t den = int256_t(n0) * int256_t(n1);
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  return static_cast<std::uint8_t>(best_t);
}

std::uint8_t otsu_threshold(const Raster& channel) { return otsu_threshold(histogram(channel)); }

BinaryMask binarize(const Raster& channel, std::uint8_t low, std::uint8_t high) {
  if (channel.channels() != 1) throw Error("binarize expects a single-channel raster");
  if (low > high) throw Error("binarize requires low <= high");
  BinaryMask mask(channel.width(), channel.height());
  const auto src = channel.data();
  auto bits = mask.bits();
  for (std::size_t i = 0; i < src.size(); ++i) {
    bits[i] = (src[i] >= low && src[i] <= high) ? 1 : 0;
  }
  return mask;
}

}  // namespace histotile
