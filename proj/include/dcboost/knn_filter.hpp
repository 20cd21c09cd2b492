#pragma once

// Adaptive k-NN consistency filtering of a training batch.
//
// One similarity matrix is computed per batch and the top-m neighbours of
// every sample are kept. From that single table the number of samples whose
// k nearest neighbours all share their pseudo-label is read off for every
// k in [1, m'], giving score_k = k * n_s(k) / n_B. The k with the highest score
// defines the high-confidence set.

#include <cstdint>
#include <optional>
#include <vector>

#include "dcboost/feature_store.hpp"

namespace dcboost {

enum class RetrievalSource { target_only, online_target_hybrid };

RetrievalSource parse_retrieval_source(std::string_view name);
std::string_view to_string(RetrievalSource source);

struct FilterConfig {
  int m = 50;
  std::optional<int> fixed_k;
  RetrievalSource retrieval_source = RetrievalSource::target_only;

  void validate() const;
};

struct BatchView {
  std::vector<std::size_t> indices;
  FeatureMatrix z_t;
  std::optional<FeatureMatrix> z_o;
  LabelVector labels;

  BatchView(std::vector<std::size_t> indices, FeatureMatrix z_t, std::optional<FeatureMatrix> z_o,
            LabelVector labels);
  std::size_t size() const { return z_t.n(); }
};

struct NeighborTable {
  int m = 0;               // effective budget m' = min(cfg.m, n_B - 1)
  bool clamped = false;    // true when cfg.m exceeded n_B - 1
  std::size_t n = 0;       // batch size
  std::vector<int> neighbors;   // n x m, batch positions
  std::vector<double> sims;     // n x m, matching similarities

  std::span<const int> neighbors_of(std::size_t i) const {
    return {neighbors.data() + i * static_cast<std::size_t>(m), static_cast<std::size_t>(m)};
  }
  std::span<const double> sims_of(std::size_t i) const {
    return {sims.data() + i * static_cast<std::size_t>(m), static_cast<std::size_t>(m)};
  }
};

struct SelectionScores {
  std::vector<std::int64_t> counts;  // counts[k-1] = n_s at k
  std::vector<double> scores;        // scores[k-1] = k * counts[k-1] / n_B
};

struct SelectionResult {
  std::vector<double> scores;
  std::vector<std::int64_t> counts;
  int k_star = 0;
  std::vector<bool> mask;
  std::vector<std::size_t> x_h;  // batch positions with mask set
};

/// Similarity matrix of the batch under the configured retrieval source.
Matrix batch_similarity(const BatchView& batch, RetrievalSource source);

/// Top-m' neighbours per sample, sorted by descending similarity with ties
/// broken by ascending batch position; self excluded.
NeighborTable build_neighbor_table(const BatchView& batch, const FilterConfig& cfg);
NeighborTable neighbor_table_from_similarity(const Matrix& sim, int m);

SelectionScores selection_scores(const NeighborTable& table, const LabelVector& labels);

/// argmax over k of scores (1-based k); ties go to the larger k.
int select_adaptive_k(std::span<const double> scores);

SelectionResult filter_high_confidence(const NeighborTable& table, const LabelVector& labels,
                                       int k_star);

/// Full pipeline: table, scores, adaptive (or fixed) k, high-confidence set.
SelectionResult select_high_confidence(const BatchView& batch, const FilterConfig& cfg);

}  // namespace dcboost
