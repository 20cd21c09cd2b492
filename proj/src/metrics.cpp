#include "dcboost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include "json.hpp"

#include "dcboost/error.hpp"
#include "dcboost/kernels.hpp"
#include "dcboost/knn_filter.hpp"
#include "dcboost/rng.hpp"

namespace dcboost {

namespace {

void check_lengths(const LabelVector& a, const LabelVector& b) {
  if (a.size() != b.size()) {
    throw ShapeError(fmt::format("label vectors differ in length ({} vs {})", a.size(), b.size()));
  }
  if (a.size() == 0) throw ValueError("empty label vectors");
}

std::vector<int> distinct(const std::vector<int>& v) {
  std::vector<int> out = v;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double choose2(std::int64_t x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

std::vector<std::int64_t> row_sums(const ContingencyTable& t) {
  std::vector<std::int64_t> s(t.rows(), 0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) s[r] += t.at(r, c);
  }
  return s;
}

std::vector<std::int64_t> col_sums(const ContingencyTable& t) {
  std::vector<std::int64_t> s(t.cols(), 0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) s[c] += t.at(r, c);
  }
  return s;
}

double entropy(const std::vector<std::int64_t>& counts, double n) {
  double h = 0.0;
  for (auto c : counts) {
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

// Relabels to 0..k-1 in order of the sorted distinct values.
std::vector<int> compact(const std::vector<int>& labels, int& k) {
  const auto values = distinct(labels);
  k = static_cast<int>(values.size());
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = static_cast<int>(std::lower_bound(values.begin(), values.end(), labels[i]) - values.begin());
  }
  return out;
}

Matrix unit_rows(const FeatureMatrix& features) {
  return features.normalized() ? features.values() : l2_normalize_rows(features.values());
}

double knn_accuracy_from_gram(const Matrix& sim, const LabelVector& labels, int k) {
  const NeighborTable table = neighbor_table_from_similarity(sim, k);
  double total = 0.0;
  for (std::size_t i = 0; i < table.n; ++i) {
    int same = 0;
    for (int j : table.neighbors_of(i)) same += labels[static_cast<std::size_t>(j)] == labels[i];
    total += static_cast<double>(same) / static_cast<double>(k);
  }
  return total / static_cast<double>(table.n);
}

SimilarityPair similarity_from_gram(const Matrix& sim, const LabelVector& labels) {
  double intra = 0.0, inter = 0.0;
  std::int64_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    for (std::size_t j = i + 1; j < sim.rows(); ++j) {
      if (labels[i] == labels[j]) {
        intra += sim(i, j);
        ++n_intra;
      } else {
        inter += sim(i, j);
        ++n_inter;
      }
    }
  }
  if (n_intra == 0) throw MetricUndefinedError("no same-label pairs: intra-class similarity undefined");
  if (n_inter == 0) throw MetricUndefinedError("no cross-label pairs: inter-class similarity undefined");
  return {intra / static_cast<double>(n_intra), inter / static_cast<double>(n_inter)};
}

}  // namespace

ContingencyTable contingency(const LabelVector& a, const LabelVector& b) {
  check_lengths(a, b);
  ContingencyTable t;
  t.row_labels = distinct(a.labels);
  t.col_labels = distinct(b.labels);
  t.counts.assign(t.rows() * t.cols(), 0);
  t.n = static_cast<std::int64_t>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto r = std::lower_bound(t.row_labels.begin(), t.row_labels.end(), a[i]) - t.row_labels.begin();
    const auto c = std::lower_bound(t.col_labels.begin(), t.col_labels.end(), b[i]) - t.col_labels.begin();
    ++t.counts[static_cast<std::size_t>(r) * t.cols() + static_cast<std::size_t>(c)];
  }
  return t;
}

double nmi(const LabelVector& a, const LabelVector& b) {
  const auto t = contingency(a, b);
  const double n = static_cast<double>(t.n);
  const auto ra = row_sums(t);
  const auto cb = col_sums(t);
  const double ha = entropy(ra, n);
  const double hb = entropy(cb, n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      const auto nij = t.at(r, c);
      if (nij == 0) continue;
      const double x = static_cast<double>(nij);
      mi += x / n * std::log(n * x / (static_cast<double>(ra[r]) * static_cast<double>(cb[c])));
    }
  }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

double ari(const LabelVector& a, const LabelVector& b) {
  check_lengths(a, b);
  if (a.size() < 2) throw ValueError("ARI needs at least 2 samples");
  const auto t = contingency(a, b);
  double index = 0.0;
  for (auto c : t.counts) index += choose2(c);
  double sa = 0.0, sb = 0.0;
  for (auto c : row_sums(t)) sa += choose2(c);
  for (auto c : col_sums(t)) sb += choose2(c);
  const double expected = sa * sb / choose2(t.n);
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<int> hungarian_max(const std::vector<double>& weights, std::size_t rows, std::size_t cols) {
  // Square, 1-based potentials formulation minimizing -weight.
  const std::size_t n = std::max(rows, cols);
  auto cost = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? -weights[i * cols + j] : 0.0;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] >= 1 && p[j] - 1 < rows && j - 1 < cols) match[p[j] - 1] = static_cast<int>(j - 1);
  }
  return match;
}

std::vector<int> best_label_map(const LabelVector& pred, const LabelVector& truth) {
  const auto t = contingency(pred, truth);
  std::vector<double> w(t.counts.begin(), t.counts.end());
  const auto match = hungarian_max(w, t.rows(), t.cols());
  int max_pred = 0;
  for (int v : t.row_labels) max_pred = std::max(max_pred, v);
  std::vector<int> map(static_cast<std::size_t>(std::max(max_pred + 1, pred.num_classes)), -1);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (match[r] >= 0) map[static_cast<std::size_t>(t.row_labels[r])] = t.col_labels[static_cast<std::size_t>(match[r])];
  }
  return map;
}

double acc(const LabelVector& pred, const LabelVector& truth) {
  const auto t = contingency(pred, truth);
  std::vector<double> w(t.counts.begin(), t.counts.end());
  const auto match = hungarian_max(w, t.rows(), t.cols());
  std::int64_t matched = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (match[r] >= 0) matched += t.at(r, static_cast<std::size_t>(match[r]));
  }
  return static_cast<double>(matched) / static_cast<double>(t.n);
}

double silhouette(const FeatureMatrix& features, const LabelVector& labels,
                  const SilhouetteOptions& opts) {
  if (labels.size() != features.n()) throw ShapeError("silhouette: labels do not match features");
  if (features.n() < 3) throw MetricUndefinedError("silhouette needs at least 3 samples");
  std::vector<std::size_t> rows(features.n());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (opts.subsample_above > 0 && features.n() > opts.subsample_above) {
    Rng rng = make_rng(opts.seed, "silhouette-subsample");
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(opts.subsample_above);
    std::sort(rows.begin(), rows.end());
  }
  std::vector<int> raw(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) raw[i] = labels[rows[i]];
  int k = 0;
  const auto compacted = compact(raw, k);
  if (k < 2) throw MetricUndefinedError("silhouette needs at least 2 clusters");
  const Matrix points = features.values().gather_rows(rows);
  const auto s = kernels::silhouette_values(points, compacted, k);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

double knn_accuracy(const FeatureMatrix& features, const LabelVector& labels, int k) {
  if (labels.size() != features.n()) throw ShapeError("knn_accuracy: labels do not match features");
  if (k < 1 || static_cast<std::size_t>(k) > features.n() - 1) {
    throw ValueError(fmt::format("knn_accuracy: k={} outside [1, n-1]", k));
  }
  const Matrix u = unit_rows(features);
  return knn_accuracy_from_gram(kernels::gram(u, u), labels, k);
}

SimilarityPair intra_inter_similarity(const FeatureMatrix& features, const LabelVector& labels) {
  if (labels.size() != features.n()) throw ShapeError("similarity: labels do not match features");
  const Matrix u = unit_rows(features);
  return similarity_from_gram(kernels::gram(u, u), labels);
}

ImbalanceReport imbalance_ratio(const LabelVector& labels, int num_classes) {
  ImbalanceReport r;
  r.counts.assign(static_cast<std::size_t>(std::max(num_classes, labels.num_classes)), 0);
  for (int v : labels.labels) ++r.counts[static_cast<std::size_t>(v)];
  std::size_t mx = 0, mn = 0;
  for (auto c : r.counts) {
    if (c == 0) {
      ++r.zero_classes;
      continue;
    }
    mx = std::max(mx, c);
    mn = mn == 0 ? c : std::min(mn, c);
  }
  if (mx == 0) throw ValueError("imbalance ratio of an all-empty label set");
  if (r.zero_classes > 0) spdlog::warn("imbalance ratio: {} class(es) have no samples", r.zero_classes);
  r.ratio = static_cast<double>(mx) / static_cast<double>(mn);
  return r;
}

std::string MetricsReport::to_key_value() const {
  std::string out;
  auto put = [&](const char* key, double v) { out += fmt::format("{}={:.10g}\n", key, v); };
  put("nmi", nmi);
  put("acc", acc);
  put("ari", ari);
  put("silhouette", silhouette);
  put("knn_acc", knn_acc);
  put("intra_sim", intra_sim);
  put("inter_sim", inter_sim);
  put("imbalance_ratio", imbalance_ratio);
  out += fmt::format("warnings={}\n", warnings.size());
  return out;
}

std::string MetricsReport::to_json() const {
  auto num = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["nmi"] = num(nmi);
  j["acc"] = num(acc);
  j["ari"] = num(ari);
  j["silhouette"] = num(silhouette);
  j["knn_acc"] = num(knn_acc);
  j["intra_sim"] = num(intra_sim);
  j["inter_sim"] = num(inter_sim);
  j["imbalance_ratio"] = num(imbalance_ratio);
  j["warnings"] = warnings;
  return j.dump(2);
}

MetricsReport evaluate(const FeatureMatrix& features, const LabelVector& pred,
                       const std::optional<LabelVector>& truth, const EvalOptions& opts) {
  MetricsReport r;
  if (pred.size() != features.n()) throw ShapeError("evaluate: labels do not match features");
  if (truth) {
    r.nmi = nmi(pred, *truth);
    r.acc = acc(pred, *truth);
    r.ari = features.n() >= 2 ? ari(pred, *truth) : std::numeric_limits<double>::quiet_NaN();
  }
  const LabelVector& structure = truth ? *truth : pred;

  auto guarded = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const MetricUndefinedError& e) {
      r.warnings.push_back(fmt::format("{}: {}", name, e.what()));
    } catch (const ValueError& e) {
      r.warnings.push_back(fmt::format("{}: {}", name, e.what()));
    }
  };
  guarded("silhouette", [&] { r.silhouette = silhouette(features, structure, opts.silhouette); });

  const Matrix u = unit_rows(features);
  const Matrix sim = kernels::gram(u, u);
  guarded("knn_acc", [&] {
    const int k = std::min<int>(opts.knn_k, static_cast<int>(features.n()) - 1);
    if (k < 1) throw ValueError("too few samples for k-NN accuracy");
    r.knn_acc = knn_accuracy_from_gram(sim, structure, k);
  });
  guarded("similarity", [&] {
    const auto s = similarity_from_gram(sim, structure);
    r.intra_sim = s.intra;
    r.inter_sim = s.inter;
  });
  guarded("imbalance_ratio", [&] {
    const auto imb = imbalance_ratio(pred, pred.num_classes);
    r.imbalance_ratio = imb.ratio;
    if (imb.zero_classes > 0) {
      r.warnings.push_back(fmt::format("imbalance_ratio: {} empty predicted classes", imb.zero_classes));
    }
  });
  return r;
}

}  // namespace dcboost
