#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace histotile {

/// Non-owning row-major view.
struct MatrixView {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t i) const { return data.subspan(i * cols, cols); }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Owning row-major matrix.
struct Matrix {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : data(r * c, fill), rows(r), cols(c) {}

  std::span<double> row(std::size_t i) { return std::span<double>(data).subspan(i * cols, cols); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * cols, cols);
  }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  MatrixView view() const { return {data, rows, cols}; }

  bool operator==(const Matrix&) const = default;
};

}  // namespace histotile
