#include "histotile/kernels.hpp"

#include <cmath>

#include "histotile/error.hpp"
#include "histotile/features.hpp"

namespace histotile::kernels {
namespace {

using Index = std::ptrdiff_t;

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

void check_same_width(MatrixView a, MatrixView b) {
  if (a.cols != b.cols) throw Error("pairwise distances need equal widths");
}

// Centered copy, column-major, so each covariance entry is a contiguous dot product.
std::vector<double> centered_columns(MatrixView x, std::span<const double> mean) {
  const std::size_t n = x.rows, d = x.cols;
  std::vector<double> centered(n * d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered[c * n + r] = x(r, c) - mean[c];
  return centered;
}

void covariance_entry_row(const std::vector<double>& centered, std::size_t n, std::size_t i, Matrix& out) {
  const double* ci = &centered[i * n];
  const double denom = static_cast<double>(n - 1);
  for (std::size_t j = i; j < out.cols; ++j) {
    const double* cj = &centered[j * n];
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += ci[r] * cj[r];
    out(i, j) = s / denom;
    out(j, i) = s / denom;
  }
}

void check_covariance(MatrixView x, std::span<const double> mean) {
  if (x.rows < 2) throw Error("covariance needs at least 2 rows");
  if (mean.size() != x.cols) throw Error("covariance mean has the wrong width");
}

}  // namespace

Matrix pairwise_sq_dists_serial(MatrixView a, MatrixView b) {
  check_same_width(a, b);
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) out(i, j) = sq_dist(a.row(i), b.row(j));
  return out;
}

Matrix pairwise_sq_dists_parallel(MatrixView a, MatrixView b) {
  check_same_width(a, b);
  Matrix out(a.rows, b.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(a.rows); ++i) {
    const auto ai = a.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows; ++j) out(static_cast<std::size_t>(i), j) = sq_dist(ai, b.row(j));
  }
  return out;
}

void rbf_from_sq_dists_serial(std::span<const double> sq_dists, double gamma, std::span<double> out) {
  for (std::size_t i = 0; i < sq_dists.size(); ++i) out[i] = std::exp(-gamma * sq_dists[i]);
}

void rbf_from_sq_dists_parallel(std::span<const double> sq_dists, double gamma,
                                std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(sq_dists.size()); ++i) {
    out[static_cast<std::size_t>(i)] = std::exp(-gamma * sq_dists[static_cast<std::size_t>(i)]);
  }
}

void rbf_row_serial(MatrixView x, std::size_t i, double gamma, std::span<double> out) {
  const auto xi = x.row(i);
  for (std::size_t j = 0; j < x.rows; ++j) out[j] = std::exp(-gamma * sq_dist(xi, x.row(j)));
}

void rbf_row_parallel(MatrixView x, std::size_t i, double gamma, std::span<double> out) {
  const auto xi = x.row(i);
#pragma omp parallel for schedule(static) if (x.rows * x.cols > 65536)
  for (Index j = 0; j < static_cast<Index>(x.rows); ++j) {
    out[static_cast<std::size_t>(j)] = std::exp(-gamma * sq_dist(xi, x.row(static_cast<std::size_t>(j))));
  }
}

Matrix covariance_serial(MatrixView x, std::span<const double> mean) {
  check_covariance(x, mean);
  const auto centered = centered_columns(x, mean);
  Matrix out(x.cols, x.cols);
  for (std::size_t i = 0; i < x.cols; ++i) covariance_entry_row(centered, x.rows, i, out);
  return out;
}

Matrix covariance_parallel(MatrixView x, std::span<const double> mean) {
  check_covariance(x, mean);
  const auto centered = centered_columns(x, mean);
  Matrix out(x.cols, x.cols);
#pragma omp parallel for schedule(dynamic, 4)
  for (Index i = 0; i < static_cast<Index>(x.cols); ++i) {
    covariance_entry_row(centered, x.rows, static_cast<std::size_t>(i), out);
  }
  return out;
}

Matrix pftas_rows_serial(std::span<const Raster> patches) {
  Matrix out(patches.size(), kPftasLength);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto row = pftas(patches[i]);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

Matrix pftas_rows_parallel(std::span<const Raster> patches) {
  Matrix out(patches.size(), kPftasLength);
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < static_cast<Index>(patches.size()); ++i) {
    const auto row = pftas(patches[static_cast<std::size_t>(i)]);
    std::copy(row.begin(), row.end(), out.row(static_cast<std::size_t>(i)).begin());
  }
  return out;
}

}  // namespace histotile::kernels
