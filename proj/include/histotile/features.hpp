#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "histotile/matrix.hpp"
#include "histotile/raster.hpp"
#include "histotile/types.hpp"

namespace histotile {

enum class FeatureKind { pftas, deep, deep_pca };

std::string_view to_string(FeatureKind kind);
std::optional<FeatureKind> parse_feature_kind(std::string_view text);

inline constexpr std::size_t kTasBins = 9;
inline constexpr std::size_t kPftasLength = 162;
inline constexpr std::size_t kDeepLength = 2048;
/// Bumped whenever the PFTAS definition changes; part of the feature-cache key.
inline constexpr std::string_view kPftasVersion = "pftas-v1";

/// Row-per-instance features with unique provenance keys.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(FeatureKind kind, std::size_t cols);

  FeatureKind kind() const { return kind_; }
  std::size_t rows() const { return keys_.size(); }
  std::size_t cols() const { return values_.cols; }

  /// Throws on width mismatch or duplicate provenance.
  void add_row(const Provenance& key, std::span<const double> values);

  std::span<const double> row(std::size_t i) const { return values_.row(i); }
  const Provenance& key(std::size_t i) const { return keys_[i]; }
  const std::vector<Provenance>& keys() const { return keys_; }
  std::optional<std::size_t> find(const Provenance& key) const;

  MatrixView view() const { return values_.view(); }
  const Matrix& values() const { return values_; }

  FeatureMatrix select(std::span<const std::size_t> rows) const;

  bool operator==(const FeatureMatrix& other) const {
    return kind_ == other.kind_ && keys_ == other.keys_ && values_ == other.values_;
  }

 private:
  FeatureKind kind_ = FeatureKind::pftas;
  Matrix values_;
  std::vector<Provenance> keys_;
  std::map<Provenance, std::size_t> index_;
};

using TasHistogram = std::array<double, kTasBins>;

/// Bin b = fraction of set pixels with exactly b set 8-neighbors (out-of-bounds
/// neighbors count as unset). All zeros for an empty mask.
TasHistogram tas_histogram(const BinaryMask& mask);

/// Parameter-free threshold adjacency statistics of an RGB raster, 162 values.
///
/// For each channel (R, G, B): T = Otsu threshold, mu and sigma = mean and
/// population deviation of pixels strictly above T. Three inclusive ranges
/// [mu - sigma, mu + sigma], [mu - sigma, 255] and [mu + sigma, 255] (bounds
/// rounded half-up, then clamped to [0, 255]) are binarized; each mask and its
/// complement contribute one 9-bin TAS histogram.
std::vector<double> pftas(const Raster& rgb);

/// CSV contract: header `patient_id,image_id,col,row,f0,...,f<n-1>`, one row per patch.
FeatureMatrix read_feature_csv(const std::filesystem::path& path, FeatureKind kind,
                               std::optional<std::size_t> required_width = std::nullopt);
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& features);

/// Externally computed CNN features, width 2048 enforced.
FeatureMatrix import_deep_features(const std::filesystem::path& path);

}  // namespace histotile
