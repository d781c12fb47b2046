#include "histotile/patches.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iterator>
#include <system_error>

#include "histotile/error.hpp"
#include "histotile/image_io.hpp"
#include "histotile/imaging.hpp"
#include "histotile/kernels.hpp"
#include "histotile/seed.hpp"

namespace histotile {
namespace {

namespace fs = std::filesystem;

constexpr char kCacheMagic[8] = {'H', 'T', 'F', 'C', '0', '0', '0', '1'};

// Runs body(i) for i in [0, n), optionally with OpenMP, rethrowing the first failure.
template <class Body>
void for_each_index(std::size_t n, bool parallel, Body body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(histotile_patch_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

Matrix image_patch_rows(const ImageEntry& entry, const FeatureCache& cache) {
  std::string key;
  if (cache.enabled()) {
    key = FeatureCache::key_for(entry.path, kPatchSide);
    if (auto hit = cache.load(key)) return *std::move(hit);
  }
  const Raster image = read_image(entry.path);
  std::vector<Raster> pixels;
  for (const TileOrigin& o : tile_grid(image.width(), image.height())) {
    pixels.push_back(image.crop(o.x, o.y, kPatchSide, kPatchSide));
  }
  Matrix rows = kernels::pftas_rows_serial(pixels);
  if (cache.enabled()) cache.store(key, rows);
  return rows;
}

}  // namespace

FeatureCache::FeatureCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(*dir_, ec);
  if (!fs::is_directory(*dir_)) throw Error("cannot create feature cache " + dir_->string());
}

FeatureCache FeatureCache::from_env() {
  if (const char* dir = std::getenv("HISTOTILE_CACHE"); dir != nullptr && *dir != '\0') {
    return FeatureCache(fs::path(dir));
  }
  return FeatureCache();
}

std::string FeatureCache::key_for(const fs::path& image, int side) {
  std::ifstream in(image, std::ios::binary);
  if (!in) throw Error("cannot open " + image.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  char buf[96];
  std::snprintf(buf, sizeof buf, "%016llx-%s-%d",
                static_cast<unsigned long long>(fnv1a64(bytes)), std::string(kPftasVersion).c_str(), side);
  return buf;
}

std::optional<Matrix> FeatureCache::load(const std::string& key) const {
  if (!dir_) return std::nullopt;
  std::ifstream in(*dir_ / (key + ".bin"), std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::uint64_t rows = 0, cols = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || !std::equal(magic, magic + 8, kCacheMagic) || cols != kPftasLength || rows > 1'000'000) {
    return std::nullopt;
  }
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in) return std::nullopt;
  return m;
}

void FeatureCache::store(const std::string& key, const Matrix& rows) const {
  if (!dir_) return;
  const fs::path final_path = *dir_ / (key + ".bin");
  const fs::path tmp = *dir_ / (key + ".tmp" + std::to_string(reinterpret_cast<std::uintptr_t>(&rows)));
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) return;
    const std::uint64_t r = rows.rows, c = rows.cols;
    out.write(kCacheMagic, sizeof kCacheMagic);
    out.write(reinterpret_cast<const char*>(&r), sizeof r);
    out.write(reinterpret_cast<const char*>(&c), sizeof c);
    out.write(reinterpret_cast<const char*>(rows.data.data()),
              static_cast<std::streamsize>(rows.data.size() * sizeof(double)));
  }
  std::error_code ec;
  fs::rename(tmp, final_path, ec);
  if (ec) fs::remove(tmp, ec);
}

Provenance tile_key(const ImageEntry& entry) { return {entry.patient_id, entry.image_id, 0, 0}; }

PatchSet extract_patch_pftas(const CorpusManifest& manifest, const FeatureCache& cache, bool parallel) {
  std::vector<Matrix> per_image(manifest.entries.size());
  for_each_index(manifest.entries.size(), parallel, [&](std::size_t i) {
    per_image[i] = image_patch_rows(manifest.entries[i], cache);
  });

  PatchSet set{FeatureMatrix(FeatureKind::pftas, kPftasLength), {}, {}};
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const ImageEntry& e = manifest.entries[i];
    const auto label = e.binary_label();
    if (!label) throw Error("patch extraction needs breakhis-like entries");
    const auto info = probe_image(e.path);
    if (!info) throw Error("cannot decode " + e.path.string());
    const auto grid = tile_grid(info->width, info->height);
    if (grid.size() != per_image[i].rows) throw Error("cached features do not match " + e.path.string());
    for (std::size_t p = 0; p < grid.size(); ++p) {
      set.features.add_row({e.patient_id, e.image_id, grid[p].col, grid[p].row}, per_image[i].row(p));
      set.magnification.push_back(e.magnification);
      set.label.push_back(*label);
    }
  }
  return set;
}

FeatureMatrix extract_tile_pftas(std::span<const ImageEntry> entries, const FeatureCache& cache,
                                 bool parallel) {
  std::vector<std::vector<double>> rows(entries.size());
  for_each_index(entries.size(), parallel, [&](std::size_t i) {
    std::string key;
    if (cache.enabled()) {
      key = FeatureCache::key_for(entries[i].path, 0);
      if (auto hit = cache.load(key); hit && hit->rows == 1) {
        rows[i] = hit->data;
        return;
      }
    }
    rows[i] = pftas(read_image(entries[i].path));
    if (cache.enabled()) {
      Matrix m(1, kPftasLength);
      m.data = rows[i];
      cache.store(key, m);
    }
  });
  FeatureMatrix out(FeatureKind::pftas, kPftasLength);
  for (std::size_t i = 0; i < entries.size(); ++i) out.add_row(tile_key(entries[i]), rows[i]);
  return out;
}

PatchSet attach_patch_features(const CorpusManifest& manifest, const FeatureMatrix& features) {
  PatchSet set{FeatureMatrix(features.kind(), features.cols()), {}, {}};
  for (const ImageEntry& e : manifest.entries) {
    const auto label = e.binary_label();
    if (!label) throw Error("patch features need breakhis-like entries");
    const auto info = probe_image(e.path);
    if (!info) throw Error("cannot decode " + e.path.string());
    for (const TileOrigin& o : tile_grid(info->width, info->height)) {
      const Provenance key{e.patient_id, e.image_id, o.col, o.row};
      const auto row = features.find(key);
      if (!row) {
        throw InputError("feature file has no row for " + key.patient_id + "," + key.image_id + "," +
                         std::to_string(key.col) + "," + std::to_string(key.row));
      }
      set.features.add_row(key, features.row(*row));
      set.magnification.push_back(e.magnification);
      set.label.push_back(*label);
    }
  }
  return set;
}

}  // namespace histotile
