#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"

#include "histotile/features.hpp"
#include "histotile/matrix.hpp"

namespace histotile {

struct PcaModel {
  std::vector<double> mean;
  Matrix components;  // k x d, orthonormal rows
  std::vector<double> eigenvalues;  // descending, clamped at 0
  double total_variance = 0.0;

  std::size_t k() const { return components.rows; }
  std::size_t input_width() const { return mean.size(); }
  double explained_variance_ratio() const;

  std::vector<double> transform(std::span<const double> x) const;
  FeatureMatrix transform(const FeatureMatrix& x) const;
  /// Maps a projected vector back to input space.
  std::vector<double> reconstruct(std::span<const double> projected) const;

  nlohmann::json to_json() const;
  static PcaModel from_json(const nlohmann::json& j);
};

/// Eigendecomposition of the mean-centered sample covariance. Each component's
/// largest-magnitude entry is made positive. Requires 2 <= rows and
/// 1 <= k <= min(rows - 1, cols).
PcaModel fit_pca(MatrixView train, std::size_t k);

}  // namespace histotile
