#include "dcboost/kernels.hpp"

#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dcboost/error.hpp"

namespace dcboost::kernels {

namespace {

// Row-level bodies shared by both variants; only the outer loop differs.

inline void gram_row(const Matrix& a, const Matrix& b, std::size_t i, Matrix& out) {
  auto ai = a.row(i);
  auto oi = out.row(i);
  for (std::size_t j = 0; j < b.rows(); ++j) oi[j] = dot(ai, b.row(j));
}

inline void affine_row(const Matrix& x, const Matrix& w, std::span<const double> bias,
                       std::size_t i, Matrix& out) {
  auto xi = x.row(i);
  auto oi = out.row(i);
  for (std::size_t o = 0; o < w.rows(); ++o) oi[o] = dot(xi, w.row(o)) + bias[o];
}

inline double nearest_row(const Matrix& points, const Matrix& centroids, std::size_t i,
                          int& label) {
  auto p = points.row(i);
  double best = std::numeric_limits<double>::infinity();
  int arg = 0;
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double dist = squared_distance(p, centroids.row(c));
    if (dist < best) {
      best = dist;
      arg = static_cast<int>(c);
    }
  }
  label = arg;
  return best;
}

inline double silhouette_row(const Matrix& points, std::span<const int> labels,
                             std::span<const std::size_t> sizes, std::size_t i,
                             std::vector<double>& sums) {
  std::fill(sums.begin(), sums.end(), 0.0);
  auto p = points.row(i);
  for (std::size_t j = 0; j < points.rows(); ++j) {
    if (j == i) continue;
    sums[static_cast<std::size_t>(labels[j])] += std::sqrt(squared_distance(p, points.row(j)));
  }
  const auto own = static_cast<std::size_t>(labels[i]);
  if (sizes[own] <= 1) return 0.0;
  const double a = sums[own] / static_cast<double>(sizes[own] - 1);
  double b = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (c == own || sizes[c] == 0) continue;
    b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
  }
  if (!std::isfinite(b)) return 0.0;
  const double denom = std::max(a, b);
  return denom > 0.0 ? (b - a) / denom : 0.0;
}

void check_affine(const Matrix& x, const Matrix& w, std::span<const double> bias) {
  if (x.cols() != w.cols() || bias.size() != w.rows()) {
    throw ShapeError("affine: dimension mismatch");
  }
}

std::vector<std::size_t> cluster_sizes(std::span<const int> labels, int num_classes) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(num_classes), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

}  // namespace

namespace serial {

Matrix gram(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("gram: dimension mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) gram_row(a, b, i, out);
  return out;
}

Matrix affine(const Matrix& x, const Matrix& weight, std::span<const double> bias) {
  check_affine(x, weight, bias);
  Matrix out(x.rows(), weight.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) affine_row(x, weight, bias, i, out);
  return out;
}

std::vector<double> nearest_centroid(const Matrix& points, const Matrix& centroids,
                                     std::span<int> labels) {
  std::vector<double> dist(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    dist[i] = nearest_row(points, centroids, i, labels[i]);
  }
  return dist;
}

std::vector<double> silhouette_values(const Matrix& points, std::span<const int> labels,
                                      int num_classes) {
  const auto sizes = cluster_sizes(labels, num_classes);
  std::vector<double> s(points.rows());
  std::vector<double> sums(sizes.size());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    s[i] = silhouette_row(points, labels, sizes, i, sums);
  }
  return s;
}

}  // namespace serial

namespace parallel {

Matrix gram(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("gram: dimension mismatch");
  Matrix out(a.rows(), b.rows());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) gram_row(a, b, static_cast<std::size_t>(i), out);
  return out;
}

Matrix affine(const Matrix& x, const Matrix& weight, std::span<const double> bias) {
  check_affine(x, weight, bias);
  Matrix out(x.rows(), weight.rows());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    affine_row(x, weight, bias, static_cast<std::size_t>(i), out);
  }
  return out;
}

std::vector<double> nearest_centroid(const Matrix& points, const Matrix& centroids,
                                     std::span<int> labels) {
  std::vector<double> dist(points.rows());
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    dist[u] = nearest_row(points, centroids, u, labels[u]);
  }
  return dist;
}

std::vector<double> silhouette_values(const Matrix& points, std::span<const int> labels,
                                      int num_classes) {
  const auto sizes = cluster_sizes(labels, num_classes);
  std::vector<double> s(points.rows());
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel
  {
    std::vector<double> sums(sizes.size());
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      s[u] = silhouette_row(points, labels, sizes, u, sums);
    }
  }
  return s;
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace dcboost::kernels
