#include <doctest.h>

#include <random>

#include "dcboost/kernels.hpp"
#include "oracles.hpp"

using namespace dcboost;
namespace ks = dcboost::kernels::serial;
namespace kp = dcboost::kernels::parallel;

namespace {
Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (auto& v : m.values()) v = g(rng);
  return m;
}
}  // namespace

TEST_CASE("gram: serial equals parallel bitwise and matches naive dots") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_matrix(1 + rng() % 200, 1 + rng() % 20, rng);
    const auto b = random_matrix(1 + rng() % 200, a.cols(), rng);
    const Matrix s = ks::gram(a, b);
    CHECK(s == kp::gram(a, b));
    for (std::size_t i = 0; i < a.rows(); i += 7) {
      for (std::size_t j = 0; j < b.rows(); j += 5) CHECK(s(i, j) == doctest::Approx(oracle::dotp(a, i, b, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("affine: serial equals parallel bitwise") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_matrix(1 + rng() % 300, 1 + rng() % 30, rng);
    const auto w = random_matrix(1 + rng() % 30, x.cols(), rng);
    const auto bias = random_matrix(1, w.rows(), rng);
    const Matrix s = ks::affine(x, w, bias.values());
    CHECK(s == kp::affine(x, w, bias.values()));
    CHECK(s(0, 0) == doctest::Approx(oracle::dotp(x, 0, w, 0) + bias(0, 0)).epsilon(1e-12));
  }
}

TEST_CASE("nearest_centroid: serial equals parallel, ties to the lower index") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_matrix(500, 4, rng);
    const auto c = random_matrix(7, 4, rng);
    std::vector<int> ls(500), lp(500);
    CHECK(ks::nearest_centroid(p, c, ls) == kp::nearest_centroid(p, c, lp));
    CHECK(ls == lp);
  }
  const Matrix p(1, 1, {0.0});
  const Matrix c(3, 1, {2.0, -1.0, 1.0});
  std::vector<int> l(1);
  CHECK(ks::nearest_centroid(p, c, l) == std::vector<double>{1.0});
  CHECK(l[0] == 1);
}

TEST_CASE("silhouette_values: serial equals parallel bitwise") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_matrix(300, 3, rng);
    auto labels = oracle::random_labels(300, 5, rng);
    CHECK(ks::silhouette_values(p, labels, 6) == kp::silhouette_values(p, labels, 6));
  }
  CHECK(kernels::max_threads() >= 1);
}
