#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

#include "histotile/matrix.hpp"

namespace histotile {

struct KernelParams {
  double c = 1.0;
  double gamma = 1.0;

  bool operator==(const KernelParams&) const = default;
};

/// Per-feature z-scoring fit on training rows. Constant features get stddev 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(MatrixView x);
  std::vector<double> apply(std::span<const double> x) const;
  Matrix apply(MatrixView x) const;
};

/// p(positive | f) = 1 / (1 + exp(a * f + b)).
struct PlattCalibration {
  double a = -1.0;
  double b = 0.0;

  double probability(double decision) const;
  /// Platt's method with Lin-Lin-Weng's Newton iteration and target smoothing.
  static PlattCalibration fit(std::span<const double> decisions, std::span<const int> labels);
};

struct TrainedClassifier {
  Standardizer standardizer;
  Matrix support_vectors;  // standardized coordinates
  std::vector<double> dual_coefs;  // y_i * alpha_i
  double bias = 0.0;
  KernelParams params;
  PlattCalibration calibration;

  std::size_t input_width() const { return standardizer.mean.size(); }

  /// sum_i dual_i * exp(-gamma ||z - sv_i||^2) + bias on the standardized input z.
  double decision(std::span<const double> x) const;
  /// Probability of the positive (+1, malign / relevant) class.
  double probability(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return probability(x) >= 0.5 ? +1 : -1; }

  nlohmann::json to_json() const;
  static TrainedClassifier from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TrainedClassifier load(const std::filesystem::path& path);
};

/// Row access to a (possibly implicit) kernel matrix K(i, j).
class KernelSource {
 public:
  virtual ~KernelSource() = default;
  virtual std::size_t size() const = 0;
  /// Row i of K; valid until the next call to row().
  virtual std::span<const double> row(std::size_t i) = 0;
  virtual double diagonal(std::size_t i) const = 0;
};

/// Fully materialized kernel matrix.
class DenseKernel final : public KernelSource {
 public:
  explicit DenseKernel(Matrix k) : k_(std::move(k)) {}
  static DenseKernel rbf(MatrixView x, double gamma);
  std::size_t size() const override { return k_.rows; }
  std::span<const double> row(std::size_t i) override { return k_.row(i); }
  double diagonal(std::size_t i) const override { return k_(i, i); }
  const Matrix& matrix() const { return k_; }

 private:
  Matrix k_;
};

/// RBF rows computed on demand with a bounded LRU cache.
class CachedRbfKernel final : public KernelSource {
 public:
  CachedRbfKernel(MatrixView x, double gamma, std::size_t cache_bytes);
  std::size_t size() const override { return x_.rows; }
  std::span<const double> row(std::size_t i) override;
  double diagonal(std::size_t) const override { return 1.0; }

 private:
  MatrixView x_;
  double gamma_;
  std::size_t capacity_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::size_t> slot_of_;  // row -> slot + 1, 0 when not cached
  std::vector<std::size_t> row_of_slot_;
  std::vector<std::uint64_t> last_used_;
  std::uint64_t clock_ = 0;
};

struct SmoOptions {
  double tol = 1e-3;
  std::size_t max_iterations = 0;  // 0 = max(10'000'000, 100 n)
};

struct SmoSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Soft-margin dual solved by SMO with maximal-violating-pair working-set selection.
/// Stops when the maximal KKT violation gap drops to opts.tol.
SmoSolution solve_smo(KernelSource& kernel, std::span<const int> y, double c,
                      const SmoOptions& opts = {});

/// Largest KKT residual over the training points, recomputing f(x_i) directly
/// from the kernel rather than from the solver's gradient.
double max_kkt_violation(KernelSource& kernel, std::span<const int> y, const SmoSolution& sol,
                         double c);

struct TrainOptions {
  double tol = 1e-3;
  std::uint64_t seed = 0;
  bool calibrate = true;
  int calibration_folds = 3;
  std::size_t dense_kernel_limit = 6000;  // larger problems use CachedRbfKernel
  std::size_t cache_bytes = std::size_t{512} << 20;
};

struct TrainResult {
  TrainedClassifier model;
  std::vector<double> alpha;  // per training row
  std::size_t iterations = 0;
  bool converged = false;
};

/// Labels are +1 / -1. Throws on single-class input or non-finite features.
TrainResult train_detailed(MatrixView x, std::span<const int> y, const KernelParams& params,
                           const TrainOptions& opts = {});
TrainedClassifier train(MatrixView x, std::span<const int> y, const KernelParams& params,
                        const TrainOptions& opts = {});

/// KKT residual of each training row for a trained model and its per-row alphas.
std::vector<double> kkt_residuals(const TrainedClassifier& model, MatrixView x,
                                  std::span<const int> y, std::span<const double> alpha);

struct GridPoint {
  KernelParams params;
  double mean_accuracy = 0.0;
};

struct GridSearchReport {
  std::vector<GridPoint> grid;
  KernelParams best;
  double best_accuracy = 0.0;
  int cv_folds = 5;

  nlohmann::json to_json() const;
};

/// C in {2^-5, 2^-3, ..., 2^15}, gamma in {2^-15, 2^-13, ..., 2^3}.
std::vector<KernelParams> default_grid();
std::vector<KernelParams> make_grid(std::span<const double> cs, std::span<const double> gammas);

struct GridSearchOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  double tol = 1e-3;
  std::size_t dense_kernel_limit = 6000;
};

/// Stratified k-fold split: fold index per row.
std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed);

/// Stratified CV per grid point with the standardizer refit inside each fold.
/// Ties on mean accuracy go to the smaller c, then the smaller gamma.
GridSearchReport grid_search(MatrixView x, std::span<const int> y,
                             std::span<const KernelParams> grid, const GridSearchOptions& opts = {});

}  // namespace histotile
