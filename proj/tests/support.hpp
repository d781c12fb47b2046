#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "histotile/raster.hpp"
#include "histotile/seed.hpp"

namespace testsupport {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("histotile-test-" + tag + "-" + std::to_string(histotile::fnv1a64(tag) ^ counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static std::uint64_t& counter() {
    static std::uint64_t c = 0;
    return c;
  }
  std::filesystem::path path_;
};

inline histotile::Raster random_raster(int w, int h, int channels, std::uint64_t seed, int levels = 256) {
  histotile::Rng rng(seed);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * channels);
  for (auto& v : data) v = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(levels)) * (255 / (levels - 1)));
  return histotile::Raster(w, h, channels, std::move(data));
}

inline std::vector<std::uint8_t> bytes_of(const histotile::Raster& r) {
  return {r.data().begin(), r.data().end()};
}

}  // namespace testsupport
