#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "histotile/dataset.hpp"
#include "histotile/features.hpp"
#include "histotile/imaging.hpp"
#include "histotile/patches.hpp"
#include "histotile/pca.hpp"
#include "histotile/svm.hpp"

namespace histotile {

inline constexpr int kFilterCount = 7;

/// Relabeling of the eight CRC structures into relevant / irrelevant with
/// per-structure sample counts.
struct FilterSpec {
  int index = 0;
  std::map<Structure, int> relevant;
  std::map<Structure, int> irrelevant;

  int relevant_total() const;
  int irrelevant_total() const;
  /// Multiplies every count by `factor` (half-up, at least 1). For corpora
  /// with fewer than 625 tiles per structure.
  FilterSpec scaled(double factor) const;

  nlohmann::json to_json() const;
  static FilterSpec from_json(const nlohmann::json& j);
  bool operator==(const FilterSpec&) const = default;
};

/// Filters 1..7. Filter i marks the first i structures (T, ST, C, L, D, M, A, E
/// order) relevant; the minority side is undersampled to balance the totals.
FilterSpec build_filter_spec(int index);

struct RelevanceModel {
  FilterSpec filter;
  FeatureKind feature_kind = FeatureKind::pftas;
  std::optional<PcaModel> pca;
  TrainedClassifier classifier;
  KernelParams best_params;
  double validation_accuracy = 0.0;
  std::size_t train_count = 0;
  std::size_t validation_count = 0;

  /// Input is a raw feature row (pftas or deep, before this model's PCA).
  bool is_relevant(std::span<const double> features) const;

  nlohmann::json to_json() const;
  static RelevanceModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static RelevanceModel load(const std::filesystem::path& path);

  /// Model that answers `relevant` for every input of the given width.
  static RelevanceModel constant(bool relevant, FeatureKind kind, std::size_t width,
                                 int filter_index = 0);
};

/// Features for a list of crc-like entries, one row per entry keyed by tile_key().
using TileFeatureProvider = std::function<FeatureMatrix(std::span<const ImageEntry>)>;

struct RelevanceOptions {
  std::uint64_t seed = 0;
  std::vector<KernelParams> grid = default_grid();
  std::optional<std::size_t> pca_k;
  double validation_fraction = 0.15;
  double tol = 1e-3;
};

/// Seeded per-structure subsample to the FilterSpec counts, stratified 85/15 split,
/// grid search on the training part, validation accuracy on the held-out part.
RelevanceModel train_relevance_model(const CorpusManifest& crc, const FilterSpec& spec,
                                     FeatureKind kind, const TileFeatureProvider& features,
                                     const RelevanceOptions& opts);

struct RetentionStats {
  int magnification = 0;
  int filter_index = 0;
  double pct_patches = 0.0;
  double pct_images = 0.0;
  /// Patients with at least one retained image.
  double pct_patients = 0.0;
  /// Mean over patients of the fraction of their images retained.
  double pct_patients_weighted = 0.0;
  std::vector<std::string> excluded_images;
  std::vector<std::string> excluded_patients;
  bool flagged = false;

  nlohmann::json to_json() const;
};

struct FilterOutcome {
  std::vector<std::size_t> retained;  // row indices into the patch set, ascending
  std::vector<RetentionStats> stats;  // one per magnification, ascending
};

FilterOutcome apply_filter(const RelevanceModel& model, const PatchSet& patches);

/// PatchRecord convenience for PFTAS models: extracts features and keeps relevant patches.
std::vector<PatchRecord> apply_filter(const RelevanceModel& model,
                                      std::span<const PatchRecord> patches,
                                      std::vector<RetentionStats>* stats = nullptr);

struct SurvivalCheck {
  bool pass = true;
  std::vector<std::string> lost_patients;
};

/// Fails when any (test) patient lost all images. Without `test_patients`
/// every patient counts.
SurvivalCheck assert_patient_survival(const RetentionStats& stats,
                                      const std::set<std::string>* test_patients = nullptr);

/// `magnification,filter,pct_patches,pct_images,pct_patients,flagged`
void write_retention_csv(const std::filesystem::path& path,
                         std::span<const RetentionStats> stats);

}  // namespace histotile
