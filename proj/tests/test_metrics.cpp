#include <doctest.h>

#include <numeric>

#include "json.hpp"

#include "dcboost/error.hpp"
#include "dcboost/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcboost;

namespace {

LabelVector lv(const std::vector<int>& v) { return LabelVector::from_labels(v); }

/// Silhouette straight from the definition on Euclidean distances.
double silhouette_oracle(const FeatureMatrix& x, const std::vector<int>& labels) {
  const std::size_t n = x.n();
  std::map<int, std::size_t> size;
  for (int l : labels) ++size[l];
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (size[labels[i]] == 1) continue;
    std::map<int, double> sum;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum[labels[j]] += std::sqrt(squared_distance(x.row(i), x.row(j)));
    }
    const double a = sum[labels[i]] / static_cast<double>(size[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, s] : sum) {
      if (l != labels[i]) b = std::min(b, s / static_cast<double>(size[l]));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("NMI, ARI and ACC agree with independent oracles on random pairs") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    const int ca = 1 + static_cast<int>(rng() % 5), cb = 1 + static_cast<int>(rng() % 5);
    const auto a = oracle::random_labels(n, ca, rng);
    const auto b = oracle::random_labels(n, cb, rng);
    CHECK(std::abs(nmi(lv(a), lv(b)) - oracle::nmi(a, b)) <= 1e-10);
    CHECK(std::abs(ari(lv(a), lv(b)) - oracle::ari(a, b)) <= 1e-10);
    CHECK(std::abs(acc(lv(a), lv(b)) - oracle::acc_bruteforce(a, b)) <= 1e-10);
  }
}

TEST_CASE("8-sample, <=3-class ACC equals brute force") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_labels(8, 3, rng);
    const auto b = oracle::random_labels(8, 3, rng);
    CHECK(acc(lv(a), lv(b)) == oracle::acc_bruteforce(a, b));
  }
}

TEST_CASE("scores are invariant under relabeling") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = oracle::random_labels(25, 4, rng);
    const auto b = oracle::random_labels(25, 4, rng);
    std::vector<int> perm{0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> pa(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] = perm[static_cast<std::size_t>(a[i])];
    CHECK(nmi(lv(pa), lv(b)) == doctest::Approx(nmi(lv(a), lv(b))).epsilon(1e-12));
    CHECK(ari(lv(pa), lv(b)) == doctest::Approx(ari(lv(a), lv(b))).epsilon(1e-12));
    CHECK(acc(lv(pa), lv(b)) == doctest::Approx(acc(lv(a), lv(b))).epsilon(1e-12));
    // optimal matching beats the identity matching
    double identity = 0;
    for (std::size_t i = 0; i < a.size(); ++i) identity += a[i] == b[i];
    CHECK(acc(lv(a), lv(b)) >= identity / static_cast<double>(a.size()));
  }
}

TEST_CASE("Hungarian matching on rectangular weights") {
  // 2 rows, 3 cols: best is row0->col2, row1->col0
  const std::vector<double> w{1, 0, 5, 4, 3, 0};
  CHECK(hungarian_max(w, 2, 3) == std::vector<int>{2, 0});
  // 3 rows, 2 cols: one row stays unmatched
  const std::vector<double> t{1, 0, 0, 9, 7, 0};
  const auto m = hungarian_max(t, 3, 2);
  CHECK(m[1] == 1);
  CHECK(m[2] == 0);
  CHECK(m[0] == -1);
}

TEST_CASE("silhouette: tight separated clusters, interleaved sets, and the pair-loop oracle") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 0.01);
  Matrix m(40, 2);
  std::vector<int> labels(40);
  for (std::size_t i = 0; i < 40; ++i) {
    labels[i] = static_cast<int>(i % 2);
    m(i, 0) = g(rng) + (labels[i] ? 10.0 : 0.0);
    m(i, 1) = g(rng);
  }
  CHECK(silhouette(FeatureMatrix(m), lv(labels)) >= 0.99);

  Matrix same(20, 2);
  std::vector<int> alt(20);
  for (std::size_t i = 0; i < 20; ++i) {
    same(i, 0) = static_cast<double>(i / 2);
    same(i, 1) = 1.0;
    alt[i] = static_cast<int>(i % 2);
  }
  CHECK(silhouette(FeatureMatrix(same), lv(alt)) <= 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng() % 40;
    const auto x = FeatureMatrix(oracle::random_unit_rows(n, 3, rng), true);
    auto l = oracle::random_labels(n, 3, rng);
    l[0] = 0;
    l[1] = 1;
    CHECK(silhouette(x, lv(l)) == doctest::Approx(silhouette_oracle(x, l)).epsilon(1e-12));
  }
}

TEST_CASE("silhouette subsampling is seeded and undefined cases throw") {
  std::mt19937_64 rng(14);
  const auto x = FeatureMatrix(oracle::random_unit_rows(300, 4, rng), true);
  const auto l = lv(oracle::random_labels(300, 3, rng));
  const SilhouetteOptions opts{100, 5};
  CHECK(silhouette(x, l, opts) == silhouette(x, l, opts));
  CHECK(silhouette(x, l, SilhouetteOptions{1000, 5}) == silhouette(x, l));
  CHECK_THROWS_AS(silhouette(x, LabelVector(std::vector<int>(300, 0), 1)), MetricUndefinedError);
  CHECK_THROWS_AS(silhouette(FeatureMatrix(2, 1, {1, 2}), lv({0, 1})), MetricUndefinedError);
}

TEST_CASE("k-NN accuracy: orthogonal pure clusters and the neighbour oracle") {
  Matrix m(10, 2);
  std::vector<int> labels(10);
  for (std::size_t i = 0; i < 10; ++i) {
    labels[i] = i < 5 ? 0 : 1;
    m(i, labels[i]) = 1.0;
  }
  CHECK(knn_accuracy(FeatureMatrix(m, true), lv(labels), 3) == 1.0);

  // equidistant points along a line in angle space, alternating labels
  const std::size_t n = 9;
  Matrix line(n, 2);
  std::vector<int> alt(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 0.1 * static_cast<double>(i);
    line(i, 0) = std::cos(a);
    line(i, 1) = std::sin(a);
    alt[i] = static_cast<int>(i % 2);
  }
  const FeatureMatrix z(line, true);
  // oracle: the single nearest neighbour by cosine, ties to the lower index
  const Matrix sim = oracle::cosine(line);
  double hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && (sim(i, j) > sim(i, best) || (sim(i, j) == sim(i, best) && j < best))) best = j;
    }
    hits += alt[best] == alt[i];
  }
  CHECK(knn_accuracy(z, lv(alt), 1) == hits / static_cast<double>(n));
  CHECK_THROWS_AS(knn_accuracy(z, lv(alt), 9), ValueError);
  CHECK_THROWS_AS(knn_accuracy(z, lv(alt), 0), ValueError);
}

TEST_CASE("intra/inter similarity matches pair loops") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_unit_rows(10, 4, rng);
    auto l = oracle::random_labels(10, 3, rng);
    l[0] = 0;
    l[1] = 0;
    l[2] = 1;
    double intra = 0, inter = 0, ni = 0, ne = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t j = i + 1; j < 10; ++j) {
        const double s = oracle::dotp(m, i, m, j);
        if (l[i] == l[j]) {
          intra += s;
          ++ni;
        } else {
          inter += s;
          ++ne;
        }
      }
    }
    const auto r = intra_inter_similarity(FeatureMatrix(m, true), lv(l));
    CHECK(r.intra == doctest::Approx(intra / ni).epsilon(1e-12));
    CHECK(r.inter == doctest::Approx(inter / ne).epsilon(1e-12));
  }
  CHECK_THROWS_AS(intra_inter_similarity(FeatureMatrix(2, 1, {1, 1}, true), lv({0, 1})), MetricUndefinedError);
}

TEST_CASE("evaluate fills the report from the individual metrics") {
  std::mt19937_64 rng(16);
  const auto x = FeatureMatrix(oracle::random_unit_rows(60, 3, rng), true);
  const auto pred = lv(oracle::random_labels(60, 3, rng));
  const auto truth = lv(oracle::random_labels(60, 3, rng));
  const auto r = evaluate(x, pred, truth, EvalOptions{5, {}});
  CHECK(r.nmi == nmi(pred, truth));
  CHECK(r.acc == acc(pred, truth));
  CHECK(r.ari == ari(pred, truth));
  CHECK(r.silhouette == silhouette(x, truth));
  CHECK(r.knn_acc == knn_accuracy(x, truth, 5));
  CHECK(r.imbalance_ratio == imbalance_ratio(pred, 3).ratio);
  CHECK(r.warnings.empty());

  const auto no_truth = evaluate(x, pred, std::nullopt);
  CHECK(std::isnan(no_truth.nmi));
  CHECK(no_truth.silhouette == silhouette(x, pred));

  const auto j = nlohmann::json::parse(no_truth.to_json());
  CHECK(j["nmi"].is_null());
  CHECK(j["silhouette"].get<double>() == no_truth.silhouette);
  CHECK(no_truth.to_key_value().find("nmi=nan\n") != std::string::npos);
}

TEST_CASE("metric argument checks") {
  CHECK_THROWS_AS(nmi(lv({0, 1}), lv({0})), ShapeError);
  CHECK_THROWS_AS(acc(lv({0, 1}), lv({0, 1, 1})), ShapeError);
}
