#pragma once

// Data-parallel inner loops. Every kernel has a serial reference with the same
// signature; the OpenMP variant must produce bit-identical output (each output
// element is computed by exactly one thread, no cross-thread reductions).

#include <cstddef>
#include <span>
#include <vector>

#include "histotile/matrix.hpp"
#include "histotile/raster.hpp"

namespace histotile::kernels {

/// out(i, j) = ||a_i - b_j||^2
Matrix pairwise_sq_dists_serial(MatrixView a, MatrixView b);
Matrix pairwise_sq_dists_parallel(MatrixView a, MatrixView b);

/// out[i] = exp(-gamma * sq_dists[i])
void rbf_from_sq_dists_serial(std::span<const double> sq_dists, double gamma,
                              std::span<double> out);
void rbf_from_sq_dists_parallel(std::span<const double> sq_dists, double gamma,
                                std::span<double> out);

/// out[j] = exp(-gamma * ||x_i - x_j||^2) for all rows j of x.
void rbf_row_serial(MatrixView x, std::size_t i, double gamma, std::span<double> out);
void rbf_row_parallel(MatrixView x, std::size_t i, double gamma, std::span<double> out);

/// Sample covariance (n - 1 denominator) of the rows of x around `mean`.
Matrix covariance_serial(MatrixView x, std::span<const double> mean);
Matrix covariance_parallel(MatrixView x, std::span<const double> mean);

/// One PFTAS row per raster.
Matrix pftas_rows_serial(std::span<const Raster> patches);
Matrix pftas_rows_parallel(std::span<const Raster> patches);

}  // namespace histotile::kernels
