#include "dcboost/knn_filter.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dcboost/error.hpp"
#include "dcboost/kernels.hpp"

namespace dcboost {

RetrievalSource parse_retrieval_source(std::string_view name) {
  if (name == "target_only") return RetrievalSource::target_only;
  if (name == "online_target_hybrid" || name == "hybrid") return RetrievalSource::online_target_hybrid;
  throw ConfigError(fmt::format("unknown retrieval source '{}'", name));
}

std::string_view to_string(RetrievalSource source) {
  return source == RetrievalSource::target_only ? "target_only" : "online_target_hybrid";
}

void FilterConfig::validate() const {
  if (m < 1) throw ConfigError("filter.m must be >= 1");
  if (fixed_k && (*fixed_k < 1 || *fixed_k > m)) {
    throw ConfigError("filter.fixed_k must lie in [1, filter.m]");
  }
}

BatchView::BatchView(std::vector<std::size_t> idx, FeatureMatrix zt, std::optional<FeatureMatrix> zo,
                     LabelVector l)
    : indices(std::move(idx)), z_t(std::move(zt)), z_o(std::move(zo)), labels(std::move(l)) {
  if (z_t.n() < 2) throw ShapeError("a batch needs at least 2 samples");
  if (!z_t.normalized()) throw ValueError("batch target features must be normalized");
  if (labels.size() != z_t.n() || indices.size() != z_t.n()) {
    throw ShapeError("batch labels/indices do not match the feature rows");
  }
  if (z_o) {
    if (z_o->n() != z_t.n() || z_o->d() != z_t.d()) throw ShapeError("online features shape mismatch");
    if (!z_o->normalized()) throw ValueError("batch online features must be normalized");
  }
}

Matrix batch_similarity(const BatchView& batch, RetrievalSource source) {
  Matrix sim = kernels::gram(batch.z_t.values(), batch.z_t.values());
  if (source == RetrievalSource::online_target_hybrid) {
    if (!batch.z_o) throw ConfigError("hybrid retrieval needs online features");
    const Matrix so = kernels::gram(batch.z_o->values(), batch.z_o->values());
    for (std::size_t k = 0; k < sim.size(); ++k) {
      sim.values()[k] = 0.5 * (sim.values()[k] + so.values()[k]);
    }
  }
  return sim;
}

NeighborTable neighbor_table_from_similarity(const Matrix& sim, int m) {
  const std::size_t n = sim.rows();
  NeighborTable table;
  table.n = n;
  table.m = m;
  const auto mm = static_cast<std::size_t>(m);
  table.neighbors.resize(n * mm);
  table.sims.resize(n * mm);
  std::vector<int> cand(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    auto srow = sim.row(i);
    std::size_t w = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand[w++] = static_cast<int>(j);
    }
    std::partial_sort(cand.begin(), cand.begin() + m, cand.end(), [&](int a, int b) {
      const double sa = srow[static_cast<std::size_t>(a)];
      const double sb = srow[static_cast<std::size_t>(b)];
      return sa > sb || (sa == sb && a < b);
    });
    for (std::size_t r = 0; r < mm; ++r) {
      table.neighbors[i * mm + r] = cand[r];
      table.sims[i * mm + r] = srow[static_cast<std::size_t>(cand[r])];
    }
  }
  return table;
}

NeighborTable build_neighbor_table(const BatchView& batch, const FilterConfig& cfg) {
  cfg.validate();
  const int limit = static_cast<int>(batch.size()) - 1;
  const int m = std::min(cfg.m, limit);
  const Matrix sim = batch_similarity(batch, cfg.retrieval_source);
  NeighborTable table = neighbor_table_from_similarity(sim, m);
  if (cfg.m > limit) {
    table.clamped = true;
    spdlog::warn("neighbour budget m={} clamped to {} for a batch of {}", cfg.m, m, batch.size());
  }
  return table;
}

namespace {

// Position of the first neighbour whose label differs from the sample's own,
// or m when all m neighbours agree. The sample is consistent at every k <= it.
std::vector<int> consistent_prefix(const NeighborTable& table, const LabelVector& labels) {
  if (labels.size() != table.n) throw ShapeError("labels do not match the neighbour table");
  std::vector<int> prefix(table.n);
  for (std::size_t i = 0; i < table.n; ++i) {
    const auto nb = table.neighbors_of(i);
    int p = 0;
    while (p < table.m && labels[static_cast<std::size_t>(nb[static_cast<std::size_t>(p)])] == labels[i]) ++p;
    prefix[i] = p;
  }
  return prefix;
}

}  // namespace

SelectionScores selection_scores(const NeighborTable& table, const LabelVector& labels) {
  const auto prefix = consistent_prefix(table, labels);
  const auto m = static_cast<std::size_t>(table.m);
  // histogram of prefixes, then suffix sums: counts[k] = #{i : prefix_i >= k}
  std::vector<std::int64_t> hist(m + 1, 0);
  for (int p : prefix) ++hist[static_cast<std::size_t>(p)];
  SelectionScores out;
  out.counts.resize(m);
  out.scores.resize(m);
  std::int64_t running = 0;
  for (std::size_t k = m; k >= 1; --k) {
    running += hist[k];
    out.counts[k - 1] = running;
  }
  const auto n_b = static_cast<double>(table.n);
  for (std::size_t k = 1; k <= m; ++k) {
    out.scores[k - 1] = static_cast<double>(static_cast<std::int64_t>(k) * out.counts[k - 1]) / n_b;
  }
  return out;
}

int select_adaptive_k(std::span<const double> scores) {
  if (scores.empty()) throw ValueError("select_adaptive_k needs at least one score");
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] >= scores[best]) best = k;
  }
  return static_cast<int>(best) + 1;
}

SelectionResult filter_high_confidence(const NeighborTable& table, const LabelVector& labels,
                                       int k_star) {
  if (k_star < 1 || k_star > table.m) {
    throw ValueError(fmt::format("k_star={} outside [1, {}]", k_star, table.m));
  }
  auto sc = selection_scores(table, labels);
  const auto prefix = consistent_prefix(table, labels);
  SelectionResult r;
  r.scores = std::move(sc.scores);
  r.counts = std::move(sc.counts);
  r.k_star = k_star;
  r.mask.resize(table.n);
  for (std::size_t i = 0; i < table.n; ++i) {
    r.mask[i] = prefix[i] >= k_star;
    if (r.mask[i]) r.x_h.push_back(i);
  }
  return r;
}

SelectionResult select_high_confidence(const BatchView& batch, const FilterConfig& cfg) {
  const NeighborTable table = build_neighbor_table(batch, cfg);
  int k_star;
  if (cfg.fixed_k) {
    k_star = std::min(*cfg.fixed_k, table.m);
  } else {
    k_star = select_adaptive_k(selection_scores(table, batch.labels).scores);
  }
  return filter_high_confidence(table, batch.labels, k_star);
}

}  // namespace dcboost
