#include <doctest.h>

#include <cmath>

#include "dcboost/error.hpp"
#include "dcboost/run_config.hpp"
#include "dcboost/trainer.hpp"
#include "oracles.hpp"

using namespace dcboost;

namespace {

DatasetBundle mixture(int c, std::size_t n, double sep, std::uint64_t seed) {
  SynthConfig sc;
  sc.c = c;
  sc.d = 6;
  sc.n = n;
  sc.mean_separation = sep;
  sc.seed = seed;
  return generate_gaussian_mixture(sc);
}

TrainerConfig small_trainer(int c, std::uint64_t seed) {
  TrainerConfig cfg;
  cfg.batch_size = 32;
  cfg.encoder_hidden = {16};
  cfg.encoder_out = 8;
  cfg.pretrain_epochs = 5;
  cfg.warmup_epochs = 3;
  cfg.boost_epochs = 2;
  cfg.eval_every = 0;
  cfg.kmeans.c = c;
  cfg.kmeans.n_init = 3;
  cfg.kmeans.seed = seed;
  cfg.filter.m = 10;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("dropout zeroes about a tenth of the coordinates") {
  Matrix x(1000, 10);
  for (auto& v : x.values()) v = 1.0;
  AugmentConfig cfg;
  cfg.jitter_std = 0.0;
  cfg.dropout_prob = 0.1;
  Rng rng(1);
  const Matrix y = augment(x, cfg, {}, rng);
  double zeros = 0;
  for (double v : y.values()) zeros += v == 0.0;
  CHECK(std::abs(zeros / 1e4 - 0.1) <= 0.01);
}

TEST_CASE("pretraining separates two far-apart clusters") {
  const auto data = mixture(2, 200, 8.0, 11);
  const auto res = pretrain_baseline(data, small_trainer(2, 11));
  REQUIRE(res.kmeans_acc.has_value());
  CHECK(*res.kmeans_acc > 0.9);
  CHECK(res.nets.online == res.nets.target);
}

TEST_CASE("warm-up lowers the instance loss for most seeds") {
  int lowered = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = mixture(3, 150, 4.0, seed);
    auto cfg = small_trainer(3, seed);
    cfg.warmup_epochs = 8;
    auto nets = init_networks(data.features.d(), cfg, seed);
    TrainingSession session(data, cfg, seed);
    const auto recs = warmup(nets, data, cfg, session);
    REQUIRE(recs.size() == 8);
    lowered += recs.back().l_ins <= recs.front().l_ins;
  }
  CHECK(lowered >= 3);
}

TEST_CASE("every training batch replays against the selection oracle") {
  const auto data = mixture(3, 150, 3.0, 4);
  const auto cfg = small_trainer(3, 4);
  auto nets = init_networks(data.features.d(), cfg, 4);
  const auto pseudo = pseudo_labels(embed(nets.target, data.features), cfg, 0);
  int batches = 0;
  TrainHooks hooks;
  hooks.on_batch = [&](const BatchCapture& cap) {
    ++batches;
    const auto o = oracle::selection(oracle::cosine(cap.z_t), cap.labels.labels, cfg.filter.m);
    CHECK(cap.selection.counts == o.counts);
    CHECK(cap.selection.k_star == o.k_star);
    CHECK(cap.selection.x_h == o.x_h);
    for (std::size_t i = 0; i < cap.indices.size(); ++i) CHECK(cap.labels[i] == pseudo[cap.indices[i]]);
  };
  TrainingSession session(data, cfg, 4, hooks);
  const auto rec = train_epoch(nets, pseudo, session, 1);
  CHECK(batches == 5);
  CHECK(rec.batches.size() == 5);
}

TEST_CASE("batch records stay inside the search range") {
  const auto data = mixture(3, 150, 3.0, 5);
  const auto cfg = small_trainer(3, 5);
  auto nets = init_networks(data.features.d(), cfg, 5);
  const auto pseudo = pseudo_labels(embed(nets.target, data.features), cfg, 0);
  TrainingSession session(data, cfg, 5);
  const auto rec = train_epoch(nets, pseudo, session, 1);
  for (const auto& b : rec.batches) {
    CHECK(b.m_eff == std::min<int>(cfg.filter.m, static_cast<int>(b.size) - 1));
    CHECK(b.k_star >= 1);
    CHECK(b.k_star <= b.m_eff);
    CHECK(static_cast<std::int64_t>(b.xh_size) == b.count_at_k_star);
    CHECK(b.precision >= 0.0);
    CHECK(b.precision <= 1.0);
  }
}

TEST_CASE("the target moves only through EMA") {
  const auto data = mixture(3, 96, 3.0, 6);
  const auto cfg = small_trainer(3, 6);
  auto nets = init_networks(data.features.d(), cfg, 6);
  const auto pseudo = pseudo_labels(embed(nets.target, data.features), cfg, 0);
  std::uint64_t target_before = 0;
  MLPNetwork target_prev = nets.target;
  int steps = 0;
  TrainHooks hooks;
  hooks.on_step = [&](StepStage stage, const DualNetworks& n) {
    switch (stage) {
      case StepStage::before_step:
        target_before = n.target.parameter_hash();
        target_prev = n.target;
        break;
      case StepStage::after_sgd:
        CHECK(n.target.parameter_hash() == target_before);
        CHECK(n.online.parameter_hash() != target_before);
        break;
      case StepStage::after_ema: {
        MLPNetwork expect = target_prev;
        ema_update(n.online, expect, cfg.ema_momentum);
        CHECK(n.target == expect);
        ++steps;
        break;
      }
    }
  };
  TrainingSession session(data, cfg, 6, hooks);
  train_epoch(nets, pseudo, session, 1);
  CHECK(steps == 3);
}

TEST_CASE("learning rate scales with the batch size") {
  TrainerConfig cfg;
  cfg.base_lr = 0.05;
  cfg.batch_size = 256;
  CHECK(cfg.effective_lr() == 0.05);
  cfg.batch_size = 128;
  CHECK(cfg.effective_lr() == doctest::Approx(0.025).epsilon(1e-15));
  cfg.batch_size = 512;
  CHECK(cfg.effective_lr() == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("config parsing reports the key and the line") {
  const auto rc = parse_run_config("# comment\nseed=7\nfilter.m = 12\ntrainer.batch_size=64\n");
  CHECK(rc.seed == 7);
  CHECK(rc.trainer.filter.m == 12);
  CHECK(rc.trainer.batch_size == 64);
  CHECK(rc.trainer.seed == 7);

  auto message = [](std::string_view text) {
    try {
      parse_run_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const auto bad_value = message("seed=1\nfilter.m=abc\n");
  CHECK(bad_value.find("line 2") != std::string::npos);
  CHECK(bad_value.find("filter.m") != std::string::npos);
  const auto unknown = message("\n\nfilter.q=3\n");
  CHECK(unknown.find("line 3") != std::string::npos);
  CHECK(unknown.find("filter.q") != std::string::npos);
  CHECK(message("trainer.ema_momentum=1.5").find("trainer.ema_momentum") != std::string::npos);
  CHECK_FALSE(message("no equals sign").empty());

  // round trip through the text form
  const auto again = parse_run_config(to_config_text(rc));
  CHECK(to_config_text(again) == to_config_text(rc));
}
