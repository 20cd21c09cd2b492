#pragma once

// Data-parallel inner loops. Every kernel exists twice: a serial reference in
// kernels::serial and an OpenMP version in kernels::parallel. Each output
// element is produced by one thread with the same arithmetic order as the
// serial loop, so both variants are bit-identical for any thread count.
//
// The unqualified names in kernels:: forward to the parallel variants.

#include <span>
#include <vector>

#include "dcboost/matrix.hpp"

namespace dcboost::kernels {

namespace serial {

// out(i, j) = a.row(i) . b.row(j)
Matrix gram(const Matrix& a, const Matrix& b);
// out = x * W^T + bias; W is (out_dim x in_dim) row-major.
Matrix affine(const Matrix& x, const Matrix& weight, std::span<const double> bias);
// Nearest centroid by squared Euclidean distance, ties to the lower index.
// Returns the per-sample squared distance; labels written to `labels`.
std::vector<double> nearest_centroid(const Matrix& points, const Matrix& centroids,
                                     std::span<int> labels);
// Per-sample silhouette value s_i; singleton clusters give 0.
std::vector<double> silhouette_values(const Matrix& points, std::span<const int> labels,
                                      int num_classes);

}  // namespace serial

namespace parallel {

Matrix gram(const Matrix& a, const Matrix& b);
Matrix affine(const Matrix& x, const Matrix& weight, std::span<const double> bias);
std::vector<double> nearest_centroid(const Matrix& points, const Matrix& centroids,
                                     std::span<int> labels);
std::vector<double> silhouette_values(const Matrix& points, std::span<const int> labels,
                                      int num_classes);

}  // namespace parallel

using parallel::affine;
using parallel::gram;
using parallel::nearest_centroid;
using parallel::silhouette_values;

// Number of threads the parallel variants will use (1 without OpenMP).
int max_threads();

}  // namespace dcboost::kernels
