#include <doctest.h>

#include <numeric>

#include "dcboost/error.hpp"
#include "dcboost/losses.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcboost;

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = gradcheck::check(rng);
    CHECK(r.pos_w0 <= 1e-4);
    CHECK(r.pos_w1 <= 1e-4);
    CHECK(r.pos_ours <= 1e-4);
    CHECK(r.neg <= 1e-4);
    CHECK(r.ins <= 1e-4);
    CHECK(r.total_z <= 1e-4);
    CHECK(r.total_params <= 1e-4);
  }
}

TEST_CASE("loss values match the pair-sum definitions") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto in = gradcheck::random_instance(rng);
    CHECK(positive_loss(in.z_o, in.z_t, in.groups, WeightMode::w_ours_flow).value ==
          doctest::Approx(oracle::positive(in.z_o, in.z_t, in.ogroups, false)).epsilon(1e-12));
    CHECK(positive_loss(in.z_o, in.z_t, in.groups, WeightMode::w0_off).value ==
          doctest::Approx(oracle::positive(in.z_o, in.z_t, in.ogroups, true)).epsilon(1e-12));
    CHECK(negative_loss(compute_prototypes(in.groups, in.z_o, in.z_t), in.z_o.rows(), in.z_o.cols()).value ==
          doctest::Approx(oracle::negative(in.z_o, in.z_t, in.ogroups)).epsilon(1e-12));
    CHECK(instance_loss(in.pred, in.target).value == doctest::Approx(oracle::instance(in.pred, in.target)).epsilon(1e-12));
  }
}

TEST_CASE("duplicating a same-vector class leaves its weighted contribution unchanged") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const auto base = oracle::random_unit_rows(2, 5, rng);  // row 0: online, row 1: target
    for (std::size_t n : {1, 2, 3, 5}) {
      Matrix zo(2 * n, 5), zt(2 * n, 5);
      for (std::size_t i = 0; i < 2 * n; ++i) {
        for (std::size_t k = 0; k < 5; ++k) {
          zo(i, k) = base(0, k);
          zt(i, k) = base(1, k);
        }
      }
      std::vector<std::size_t> small(n), big(2 * n);
      std::iota(small.begin(), small.end(), std::size_t{0});
      std::iota(big.begin(), big.end(), std::size_t{0});
      const double a = positive_loss(zo, zt, std::vector<ClassGroup>{{0, small}}, WeightMode::w_ours_flow).value;
      const double b = positive_loss(zo, zt, std::vector<ClassGroup>{{0, big}}, WeightMode::w_ours_flow).value;
      CHECK(a == doctest::Approx(b).epsilon(1e-12));
      const double a0 = positive_loss(zo, zt, std::vector<ClassGroup>{{0, small}}, WeightMode::w0_off).value;
      const double b0 = positive_loss(zo, zt, std::vector<ClassGroup>{{0, big}}, WeightMode::w0_off).value;
      CHECK(b0 == doctest::Approx(4.0 * a0).epsilon(1e-12));
    }
  }
}

TEST_CASE("bounds on distances and loss terms") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const auto in = gradcheck::random_instance(rng);
    for (std::size_t i = 0; i < in.z_o.rows(); ++i) {
      for (std::size_t j = 0; j < in.z_t.rows(); ++j) {
        const double d2 = squared_distance(in.z_o.row(i), in.z_t.row(j));
        CHECK(d2 >= 0.0);
        CHECK(d2 <= 4.0 + 1e-12);
      }
    }
    const auto protos = compute_prototypes(in.groups, in.z_o, in.z_t);
    for (const auto& a : protos.prototypes) {
      for (const auto& b : protos.prototypes) {
        if (a.label == b.label) continue;
        const double term = -2.0 + 2.0 * dot(a.v_o, b.v_t);
        CHECK(term >= -4.0 - 1e-12);
        CHECK(term <= 1e-12);
      }
    }
    for (auto mode : {WeightMode::w0_off, WeightMode::w1_constant, WeightMode::w_ours_flow}) {
      CHECK(positive_loss(in.z_o, in.z_t, in.groups, mode).value >= -1e-12);
    }
    CHECK(instance_loss(in.pred, in.target).value >= 0.0);
  }
}

TEST_CASE("permuting members within a group leaves losses unchanged") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = gradcheck::random_instance(rng);
    auto shuffled = in.groups;
    for (auto& g : shuffled) std::shuffle(g.members.begin(), g.members.end(), rng);
    const auto a = total_loss(in.z_o, in.z_t, in.pred, in.target, in.groups, WeightMode::w_ours_flow);
    const auto b = total_loss(in.z_o, in.z_t, in.pred, in.target, shuffled, WeightMode::w_ours_flow);
    CHECK(std::abs(a.l_pos - b.l_pos) <= 1e-12);
    CHECK(std::abs(a.l_neg - b.l_neg) <= 1e-12);
    CHECK(std::abs(a.l_ins - b.l_ins) <= 1e-12);
  }
}

TEST_CASE("weight modes agree on values where they must") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng() % 8;
    const auto zo = oracle::random_unit_rows(n, 4, rng);
    const auto zt = oracle::random_unit_rows(n, 4, rng);
    std::vector<ClassGroup> singles;
    for (std::size_t i = 0; i < n; ++i) singles.push_back({static_cast<int>(i), {i}});
    const double v0 = positive_loss(zo, zt, singles, WeightMode::w0_off).value;
    CHECK(positive_loss(zo, zt, singles, WeightMode::w1_constant).value == doctest::Approx(v0).epsilon(1e-12));
    CHECK(positive_loss(zo, zt, singles, WeightMode::w_ours_flow).value == doctest::Approx(v0).epsilon(1e-12));

    const auto in = gradcheck::random_instance(rng);
    const auto w1 = positive_loss(in.z_o, in.z_t, in.groups, WeightMode::w1_constant);
    const auto wo = positive_loss(in.z_o, in.z_t, in.groups, WeightMode::w_ours_flow);
    CHECK(w1.value == wo.value);
  }
}

TEST_CASE("target branch only changes values, never receives gradient") {
  std::mt19937_64 rng(12);
  const auto in = gradcheck::random_instance(rng);
  const auto a = total_loss(in.z_o, in.z_t, in.pred, in.target, in.groups, WeightMode::w_ours_flow);
  const auto zt2 = oracle::random_unit_rows(in.z_t.rows(), in.z_t.cols(), rng);
  const auto tg2 = oracle::random_unit_rows(in.target.rows(), in.target.cols(), rng);
  const auto b = total_loss(in.z_o, zt2, in.pred, tg2, in.groups, WeightMode::w_ours_flow);
  CHECK(a.total != b.total);
  CHECK(a.grad_z_o.rows() == in.z_o.rows());
  CHECK(a.grad_pred.rows() == in.pred.rows());
  // the gradient depends on the target only through its value
  const auto c = total_loss(in.z_o, in.z_t, in.pred, in.target, in.groups, WeightMode::w_ours_flow);
  CHECK(a.grad_z_o == c.grad_z_o);
}

TEST_CASE("unweighted positive term grows with class size, weighted does not") {
  // one class of identical vectors, another of a single vector: w0 lets the
  // large class dominate, w_ours keeps each class at the same contribution
  Matrix zo(5, 2), zt(5, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    zo(i, 0) = 1.0;
    zt(i, 0) = 0.6;
    zt(i, 1) = 0.8;
  }
  zo(4, 1) = 1.0;
  zt(4, 0) = 0.8;
  zt(4, 1) = 0.6;
  auto contribution = [&](const ClassGroup& g, WeightMode mode) {
    return positive_loss(zo, zt, std::vector<ClassGroup>{g}, mode).value;
  };
  const ClassGroup big{0, {0, 1, 2, 3}}, small{1, {4}};
  CHECK(contribution(big, WeightMode::w0_off) == doctest::Approx(16.0 * contribution(small, WeightMode::w0_off)));
  CHECK(contribution(big, WeightMode::w_ours_flow) == doctest::Approx(contribution(small, WeightMode::w_ours_flow)));
}

TEST_CASE("loss input checks") {
  const Matrix a(2, 2, {1, 0, 0, 1});
  CHECK_THROWS_AS(instance_loss(a, Matrix(2, 3)), ShapeError);
  CHECK_THROWS_AS(positive_loss(a, a, {}, WeightMode::w0_off), ValueError);
  const Matrix opp(2, 2, {1, 0, -1, 0});
  CHECK_THROWS_AS(class_weight({0, {0, 1}}, opp, opp), DegenerateClassError);
  CHECK(parse_weight_mode("w_ours") == WeightMode::w_ours_flow);
  CHECK(parse_weight_mode("w1_constant") == WeightMode::w1_constant);
  CHECK_THROWS_AS(parse_weight_mode("w2"), ConfigError);
  // a degenerate class is dropped from both selection-based terms
  testutil::LogCapture quiet;
  const Matrix z(3, 2, {1, 0, -1, 0, 0, 1});
  const auto r = total_loss(z, z, z, z, std::vector<ClassGroup>{{0, {0, 1}}, {1, {2}}}, WeightMode::w_ours_flow);
  CHECK(r.dropped_classes == std::vector<int>{0});
  CHECK(r.num_groups == 1);
  CHECK(r.l_neg == 0.0);
}
