#include "histotile/pca.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>

#include "histotile/error.hpp"
#include "histotile/kernels.hpp"

namespace histotile {

double PcaModel::explained_variance_ratio() const {
  if (total_variance <= 0.0) return 1.0;
  return std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0) / total_variance;
}

std::vector<double> PcaModel::transform(std::span<const double> x) const {
  if (x.size() != input_width()) {
    throw Error("PCA input has width " + std::to_string(x.size()) + ", model expects " +
                std::to_string(input_width()));
  }
  std::vector<double> out(k(), 0.0);
  for (std::size_t c = 0; c < k(); ++c) {
    const auto comp = components.row(c);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - mean[j]) * comp[j];
    out[c] = s;
  }
  return out;
}

FeatureMatrix PcaModel::transform(const FeatureMatrix& x) const {
  FeatureMatrix out(FeatureKind::deep_pca, k());
  for (std::size_t i = 0; i < x.rows(); ++i) out.add_row(x.key(i), transform(x.row(i)));
  return out;
}

std::vector<double> PcaModel::reconstruct(std::span<const double> projected) const {
  if (projected.size() != k()) throw Error("projected vector has the wrong width");
  std::vector<double> out = mean;
  for (std::size_t c = 0; c < k(); ++c) {
    const auto comp = components.row(c);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += projected[c] * comp[j];
  }
  return out;
}

nlohmann::json PcaModel::to_json() const {
  return {{"mean", mean},
          {"components", components.data},
          {"k", k()},
          {"eigenvalues", eigenvalues},
          {"total_variance", total_variance}};
}

PcaModel PcaModel::from_json(const nlohmann::json& j) {
  PcaModel m;
  m.mean = j.at("mean").get<std::vector<double>>();
  const std::size_t k = j.at("k").get<std::size_t>();
  m.components = Matrix(k, m.mean.size());
  m.components.data = j.at("components").get<std::vector<double>>();
  if (m.components.data.size() != k * m.mean.size()) throw Error("PCA components have the wrong size");
  m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  m.total_variance = j.at("total_variance").get<double>();
  return m;
}

PcaModel fit_pca(MatrixView train, std::size_t k) {
  if (train.rows < 2) throw Error("PCA needs at least 2 training rows");
  if (k < 1 || k > std::min(train.rows - 1, train.cols)) {
    throw Error("PCA k=" + std::to_string(k) + " must be in 1..min(rows-1, cols)=" +
                std::to_string(std::min(train.rows - 1, train.cols)));
  }
  const std::size_t d = train.cols;
  PcaModel model;
  model.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < train.rows; ++r)
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += train(r, j);
  for (double& m : model.mean) m /= static_cast<double>(train.rows);

  const Matrix cov = kernels::covariance_parallel(train, model.mean);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      cov_map(cov.data.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_map);
  if (solver.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");

  // Eigen sorts ascending.
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Eigen::MatrixXd& vectors = solver.eigenvectors();
  model.total_variance = 0.0;
  for (std::size_t j = 0; j < d; ++j) model.total_variance += std::max(0.0, cov(j, j));
  model.components = Matrix(k, d);
  model.eigenvalues.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const Eigen::Index src = static_cast<Eigen::Index>(d - 1 - c);
    model.eigenvalues[c] = std::max(0.0, values(src));
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j) {
      if (std::abs(vectors(static_cast<Eigen::Index>(j), src)) >
          std::abs(vectors(static_cast<Eigen::Index>(arg), src))) {
        arg = j;
      }
    }
    const double sign = vectors(static_cast<Eigen::Index>(arg), src) < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      model.components(c, j) = sign * vectors(static_cast<Eigen::Index>(j), src);
    }
  }
  return model;
}

}  // namespace histotile
