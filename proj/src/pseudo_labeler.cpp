#include "dcboost/pseudo_labeler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "dcboost/error.hpp"
#include "dcboost/kernels.hpp"
#include "dcboost/rng.hpp"

namespace dcboost {

void KMeansConfig::validate() const {
  if (c < 2) throw ConfigError("kmeans.c must be >= 2");
  if (max_iter < 1) throw ConfigError("kmeans.max_iter must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("kmeans.tol must be > 0");
  if (n_init < 1) throw ConfigError("kmeans.n_init must be >= 1");
}

namespace {

Matrix kmeanspp_seed(const Matrix& x, int c, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centroids(static_cast<std::size_t>(c), x.cols());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto copy_row = [&](std::size_t from, std::size_t to) {
    auto src = x.row(from);
    std::copy(src.begin(), src.end(), centroids.row(to).begin());
  };
  copy_row(pick(rng), 0);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centroids.row(0));

  for (std::size_t k = 1; k < static_cast<std::size_t>(c); ++k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = pick(rng);
    } else {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    copy_row(chosen, k);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), centroids.row(k)));
    }
  }
  return centroids;
}

}  // namespace

KMeansModel kmeans_single(const Matrix& x, int c, int max_iter, double tol, std::uint64_t seed) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const auto cc = static_cast<std::size_t>(c);
  Rng rng(seed);

  KMeansModel model;
  model.centroids = kmeanspp_seed(x, c, rng);
  std::vector<int> labels(n, -1);
  std::vector<int> previous;
  std::vector<std::size_t> sizes(cc);

  for (int iter = 1; iter <= max_iter; ++iter) {
    previous = labels;
    const auto dist = kernels::nearest_centroid(x, model.centroids, labels);
    const double inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
    model.inertia_trace.push_back(inertia);
    model.inertia = inertia;
    model.iterations_run = iter;

    const bool stable = labels == previous;
    if (iter > 1) {
      const double prev = model.inertia_trace[model.inertia_trace.size() - 2];
      const double rel = prev > 0.0 ? (prev - inertia) / prev : 0.0;
      if (stable || rel <= tol) break;
    }
    if (iter == max_iter) break;

    // update step
    Matrix sums(cc, d);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(labels[i]);
      ++sizes[k];
      auto xi = x.row(i);
      auto sk = sums.row(k);
      for (std::size_t j = 0; j < d; ++j) sk[j] += xi[j];
    }
    std::vector<double> cur_dist = dist;
    for (std::size_t k = 0; k < cc; ++k) {
      auto ck = model.centroids.row(k);
      if (sizes[k] > 0) {
        auto sk = sums.row(k);
        for (std::size_t j = 0; j < d; ++j) ck[j] = sk[j] / static_cast<double>(sizes[k]);
        continue;
      }
      // Empty cluster: reseed at the point farthest from its centroid.
      const auto far = static_cast<std::size_t>(
          std::max_element(cur_dist.begin(), cur_dist.end()) - cur_dist.begin());
      auto xf = x.row(far);
      std::copy(xf.begin(), xf.end(), ck.begin());
      cur_dist[far] = -1.0;
      ++model.reseeds;
    }
  }
  return model;
}

KMeansModel kmeans_fit(const FeatureMatrix& features, const KMeansConfig& cfg) {
  cfg.validate();
  if (features.n() < static_cast<std::size_t>(cfg.c)) {
    throw ConfigError(fmt::format("k-means needs n >= c (n={}, c={})", features.n(), cfg.c));
  }
  std::vector<KMeansModel> runs(static_cast<std::size_t>(cfg.n_init));
  // Restarts are independent; the winner is chosen by (inertia, index).
#pragma omp parallel for schedule(dynamic) if (cfg.n_init > 1)
  for (int r = 0; r < cfg.n_init; ++r) {
    runs[static_cast<std::size_t>(r)] =
        kmeans_single(features.values(), cfg.c, cfg.max_iter, cfg.tol,
                      derive_seed(cfg.seed, "kmeans-restart", static_cast<std::uint64_t>(r)));
    runs[static_cast<std::size_t>(r)].restart = r;
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }
  return std::move(runs[best]);
}

LabelVector assign(const KMeansModel& model, const FeatureMatrix& features) {
  if (features.d() != model.centroids.cols()) {
    throw ShapeError(fmt::format("assign: feature dim {} vs centroid dim {}", features.d(),
                                 model.centroids.cols()));
  }
  std::vector<int> labels(features.n());
  kernels::nearest_centroid(features.values(), model.centroids, labels);
  return LabelVector(std::move(labels), model.num_clusters());
}

LabelVector softmax_assign(const Matrix& logits) {
  std::vector<int> labels(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    labels[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return LabelVector(std::move(labels), static_cast<int>(logits.cols()));
}

}  // namespace dcboost
