#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "histotile/dataset.hpp"
#include "histotile/filterbank.hpp"
#include "histotile/patches.hpp"
#include "histotile/pca.hpp"
#include "histotile/svm.hpp"

namespace histotile {

enum class AggregationRule { sum, vote };

std::string_view to_string(AggregationRule rule);

struct PatchPrediction {
  Provenance provenance;
  double probability_malign = 0.5;
  BinaryLabel hard_label = BinaryLabel::malign;  // probability >= 0.5

  static PatchPrediction from_probability(Provenance provenance, double probability);
};

struct ImageDecision {
  std::string image_id;
  std::string patient_id;
  AggregationRule rule = AggregationRule::sum;
  BinaryLabel predicted = BinaryLabel::benign;
  BinaryLabel truth = BinaryLabel::benign;
  std::size_t n_patches_used = 0;

  bool correct() const { return predicted == truth; }
};

/// sum: malign iff mean probability >= 0.5. vote: majority of hard labels,
/// ties fall back to the sum rule. Throws on empty input.
ImageDecision aggregate_image(std::span<const PatchPrediction> preds, AggregationRule rule,
                              BinaryLabel truth);

/// Correctly classified images / images of the patient.
double patient_score(std::span<const ImageDecision> decisions);

/// Unweighted mean of patient scores, as a percentage.
double overall_accuracy(std::span<const double> scores);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1) deviation, 0 for n < 2
};

MeanStd mean_std(std::span<const double> values);

struct FoldResult {
  int fold_index = 0;
  bool flagged = false;
  std::vector<std::string> lost_patients;
  KernelParams best_params;
  std::size_t train_patches = 0;
  std::size_t test_patches = 0;  // retained
  std::size_t test_patches_all = 0;
  double patch = 0.0;  // retained test patches
  double patch_unfiltered = 0.0;  // every test patch
  double image_sum = 0.0;
  double image_vote = 0.0;
  double patient_sum = 0.0;
  double patient_vote = 0.0;
};

struct RunReport {
  int magnification = 0;
  int filter_index = 0;  // 0 = no filter
  FeatureKind feature_kind = FeatureKind::pftas;
  std::optional<std::size_t> pca_k;
  std::vector<FoldResult> folds;
  bool flagged = false;
  std::optional<RetentionStats> retention;

  /// Level/rule rows in table order: patch, patch_unfiltered, image sum/vote, patient sum/vote.
  /// Empty for flagged runs.
  struct Row {
    std::string level;
    std::string rule;
    MeanStd value;
  };
  std::vector<Row> summary() const;

  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
  /// `magnification,level,rule,mean,std`
  std::string to_csv() const;
};

struct ExperimentConfig {
  int magnification = 200;
  int filter_index = 0;
  const RelevanceModel* filter = nullptr;  // applied when non-null
  std::optional<std::size_t> pca_k;  // deep features only
  std::vector<KernelParams> grid = default_grid();
  std::uint64_t seed = 0;
  double tol = 1e-3;
};

struct FoldModel {
  std::optional<PcaModel> pca;
  TrainedClassifier classifier;
  GridSearchReport search;

  nlohmann::json to_json() const;
};

/// Fits PCA (optional), grid search and the final classifier on the given rows only.
FoldModel train_fold_model(const PatchSet& patches, std::span<const std::size_t> train_rows,
                           std::optional<std::size_t> pca_k, std::span<const KernelParams> grid,
                           std::uint64_t seed, double tol);

/// Full protocol for one (magnification, filter) pair over all folds. `patches`
/// may hold several magnifications; only rows of cfg.magnification are used.
RunReport run_experiment(const CorpusManifest& manifest, const PatchSet& patches,
                         std::span<const FoldAssignment> folds, const ExperimentConfig& cfg);

}  // namespace histotile
