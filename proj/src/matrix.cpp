#include "dcboost/matrix.hpp"

#include <algorithm>

#include "dcboost/error.hpp"

namespace dcboost {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length does not match rows*cols");
  }
}

Matrix Matrix::gather_rows(std::span<const std::size_t> positions) const {
  Matrix out(positions.size(), cols_);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    auto src = row(positions[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

}  // namespace dcboost
