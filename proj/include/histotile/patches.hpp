#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histotile/dataset.hpp"
#include "histotile/features.hpp"

namespace histotile {

/// Features of every patch of a corpus, aligned with per-row magnification and label.
struct PatchSet {
  FeatureMatrix features;
  std::vector<int> magnification;
  std::vector<BinaryLabel> label;

  std::size_t size() const { return features.rows(); }
};

/// On-disk cache of per-image PFTAS rows keyed by (content hash, extractor version).
class FeatureCache {
 public:
  FeatureCache() = default;
  explicit FeatureCache(std::filesystem::path dir);
  /// Uses $HISTOTILE_CACHE when set, otherwise a disabled cache.
  static FeatureCache from_env();

  bool enabled() const { return dir_.has_value(); }
  std::optional<Matrix> load(const std::string& key) const;
  void store(const std::string& key, const Matrix& rows) const;

  /// Key for an image file: FNV-1a of its bytes plus the extractor version and tile side.
  static std::string key_for(const std::filesystem::path& image, int side);

 private:
  std::optional<std::filesystem::path> dir_;
};

/// PFTAS of every 150x150 patch of every image in the manifest (breakhis-like or synthetic).
PatchSet extract_patch_pftas(const CorpusManifest& manifest, const FeatureCache& cache = {},
                             bool parallel = true);

/// PFTAS of whole tiles (crc-like corpora), one row per entry.
FeatureMatrix extract_tile_pftas(std::span<const ImageEntry> entries,
                                 const FeatureCache& cache = {}, bool parallel = true);

/// Looks up the deep-feature row of every patch of every image; throws if any is missing.
PatchSet attach_patch_features(const CorpusManifest& manifest, const FeatureMatrix& features);

/// Provenance key of a crc-like entry.
Provenance tile_key(const ImageEntry& entry);

}  // namespace histotile
