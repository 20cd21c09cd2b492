#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dcboost/feature_store.hpp"

namespace dcboost {

/// Counts of (a-label, b-label) co-occurrences over labels that actually
/// appear; rows follow the sorted distinct values of a, columns those of b.
struct ContingencyTable {
  std::vector<int> row_labels;
  std::vector<int> col_labels;
  std::vector<std::int64_t> counts;  // rows x cols
  std::int64_t n = 0;

  std::size_t rows() const { return row_labels.size(); }
  std::size_t cols() const { return col_labels.size(); }
  std::int64_t at(std::size_t r, std::size_t c) const { return counts[r * cols() + c]; }
};

ContingencyTable contingency(const LabelVector& a, const LabelVector& b);

double nmi(const LabelVector& a, const LabelVector& b);
double ari(const LabelVector& a, const LabelVector& b);
double acc(const LabelVector& pred, const LabelVector& truth);

/// Maximum-weight one-to-one assignment on a rows x cols weight matrix
/// (Hungarian algorithm). Returns the matched column per row, -1 if unmatched.
std::vector<int> hungarian_max(const std::vector<double>& weights, std::size_t rows, std::size_t cols);

/// Best one-to-one map from pred cluster ids to truth class ids; clusters left
/// unmatched map to -1. Indexed by pred label.
std::vector<int> best_label_map(const LabelVector& pred, const LabelVector& truth);

struct SilhouetteOptions {
  std::size_t subsample_above = 0;  // 0 = always exact
  std::uint64_t seed = 0;
};

double silhouette(const FeatureMatrix& features, const LabelVector& labels,
                  const SilhouetteOptions& opts = {});

double knn_accuracy(const FeatureMatrix& features, const LabelVector& labels, int k);

struct SimilarityPair {
  double intra = 0.0;
  double inter = 0.0;
};
SimilarityPair intra_inter_similarity(const FeatureMatrix& features, const LabelVector& labels);

struct ImbalanceReport {
  double ratio = 0.0;
  std::vector<std::size_t> counts;
  std::size_t zero_classes = 0;
};
ImbalanceReport imbalance_ratio(const LabelVector& labels, int num_classes);

struct MetricsReport {
  double nmi = std::numeric_limits<double>::quiet_NaN();
  double acc = std::numeric_limits<double>::quiet_NaN();
  double ari = std::numeric_limits<double>::quiet_NaN();
  double silhouette = std::numeric_limits<double>::quiet_NaN();
  double knn_acc = std::numeric_limits<double>::quiet_NaN();
  double intra_sim = std::numeric_limits<double>::quiet_NaN();
  double inter_sim = std::numeric_limits<double>::quiet_NaN();
  double imbalance_ratio = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;

  std::string to_key_value() const;
  std::string to_json() const;
};

struct EvalOptions {
  int knn_k = 10;
  SilhouetteOptions silhouette;
};

/// Clustering scores of `pred` against `truth` (when given) plus structure
/// diagnostics of the feature space. Structure metrics use the truth classes
/// when available, otherwise `pred`. Undefined metrics become NaN and add a
/// warning instead of failing.
MetricsReport evaluate(const FeatureMatrix& features, const LabelVector& pred,
                       const std::optional<LabelVector>& truth, const EvalOptions& opts = {});

}  // namespace dcboost
