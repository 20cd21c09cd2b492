#pragma once

#include <cstdint>
#include <vector>

#include "dcboost/feature_store.hpp"

namespace dcboost {

struct KMeansConfig {
  int c = 10;
  int max_iter = 300;
  double tol = 1e-6;  // relative inertia change
  int n_init = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct KMeansModel {
  Matrix centroids;  // c x d
  double inertia = 0.0;
  int iterations_run = 0;
  // Inertia after every assignment step of the winning restart.
  std::vector<double> inertia_trace;
  int restart = 0;
  int reseeds = 0;  // empty-cluster reseeds in the winning restart

  int num_clusters() const { return static_cast<int>(centroids.rows()); }
};

/// Lloyd's algorithm from k-means++ seeding; best of n_init restarts by
/// (inertia, restart index). Deterministic in cfg.seed.
KMeansModel kmeans_fit(const FeatureMatrix& features, const KMeansConfig& cfg);

/// Single restart with an explicit seed; exposed for tests and restart studies.
KMeansModel kmeans_single(const Matrix& x, int c, int max_iter, double tol, std::uint64_t seed);

/// Nearest centroid (Euclidean), ties to the lower index.
LabelVector assign(const KMeansModel& model, const FeatureMatrix& features);

/// Row-wise argmax, ties to the lower index.
LabelVector softmax_assign(const Matrix& logits);

}  // namespace dcboost
