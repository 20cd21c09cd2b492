#include "dcboost/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dcboost/error.hpp"

namespace dcboost {

void AugmentConfig::validate() const {
  if (!(jitter_std >= 0.0)) throw ConfigError("augment.jitter_std must be >= 0");
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) {
    throw ConfigError("augment.dropout_prob must lie in [0, 1)");
  }
}

Matrix augment(const Matrix& x, const AugmentConfig& cfg, std::span<const double> scale, Rng& rng) {
  Matrix out = x;
  if (cfg.jitter_std > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < out.rows(); ++i) {
      auto r = out.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) {
        r[j] += cfg.jitter_std * (scale.empty() ? 1.0 : scale[j]) * normal(rng);
      }
    }
  }
  if (cfg.dropout_prob > 0.0) {
    std::bernoulli_distribution drop(cfg.dropout_prob);
    for (double& v : out.values()) {
      if (drop(rng)) v = 0.0;
    }
  }
  return out;
}

double TrainerConfig::effective_lr() const {
  return base_lr * static_cast<double>(batch_size) / 256.0;
}

void TrainerConfig::validate() const {
  if (batch_size < 2) throw ConfigError("trainer.batch_size must be >= 2");
  if (!(base_lr > 0.0)) throw ConfigError("trainer.base_lr must be > 0");
  if (!(predictor_lr_mult > 0.0)) throw ConfigError("trainer.predictor_lr_mult must be > 0");
  if (!(ema_momentum >= 0.0 && ema_momentum <= 1.0)) {
    throw ConfigError("trainer.ema_momentum must lie in [0, 1]");
  }
  if (pretrain_epochs < 0 || warmup_epochs < 0 || boost_epochs < 0) {
    throw ConfigError("epoch budgets must be >= 0");
  }
  if (!(sigma >= 0.0)) throw ConfigError("trainer.sigma must be >= 0");
  if (encoder_out < 1) throw ConfigError("trainer.encoder_out must be >= 1");
  if (eval_every < 0) throw ConfigError("trainer.eval_every must be >= 0");
  filter.validate();
  kmeans.validate();
  augment.validate();
}

MLPNetwork init_predictor(const TrainerConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, "predictor-init");
  const std::size_t hidden = cfg.predictor_hidden ? cfg.predictor_hidden : 2 * cfg.encoder_out;
  return MLPNetwork({cfg.encoder_out, hidden, cfg.encoder_out}, rng);
}

DualNetworks init_networks(std::size_t input_dim, const TrainerConfig& cfg, std::uint64_t seed) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
  dims.push_back(cfg.encoder_out);
  Rng rng = make_rng(seed, "encoder-init");
  MLPNetwork encoder(dims, rng);
  return {encoder, encoder, init_predictor(cfg, seed)};
}

// DCBM: "DCBM", u32 version, u32 network count (3: online, target,
// predictor), then each network as written by write_network.
void save_checkpoint(const DualNetworks& nets, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  os.write("DCBM", 4);
  const std::uint32_t header[2] = {1, 3};
  os.write(reinterpret_cast<const char*>(header), sizeof header);
  write_network(os, nets.online);
  write_network(os, nets.target);
  write_network(os, nets.predictor);
  if (!os) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

DualNetworks load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot open '{}'", path.string()));
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != "DCBM") {
    throw FormatError(fmt::format("'{}' is not a DCBM checkpoint", path.string()));
  }
  std::uint32_t header[2];
  if (!is.read(reinterpret_cast<char*>(header), sizeof header)) throw FormatError("truncated checkpoint");
  if (header[0] != 1) throw FormatError(fmt::format("unsupported DCBM version {}", header[0]));
  if (header[1] != 3) throw FormatError("DCBM checkpoint must hold 3 networks");
  DualNetworks nets;
  nets.online = read_network(is);
  nets.target = read_network(is);
  nets.predictor = read_network(is);
  if (!same_architecture(nets.online, nets.target)) throw ArchitectureError("online/target mismatch");
  if (nets.predictor.input_dim() != nets.online.output_dim()) {
    throw ArchitectureError("predictor does not fit the encoder output");
  }
  return nets;
}

std::string TrainHistory::to_csv() const {
  std::string out = kCsvHeader;
  out += '\n';
  auto num = [](double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string("nan"); };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& e : epochs) {
    const MetricsReport m = e.metrics.value_or(MetricsReport{});
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", e.epoch, num(e.l_pos), num(e.l_neg),
                       num(e.l_ins), num(e.l_total), num(e.kstar_mean), num(e.xh_frac),
                       num(e.sel_precision), num(e.metrics ? m.nmi : nan), num(e.metrics ? m.acc : nan),
                       num(e.metrics ? m.ari : nan), num(e.metrics ? m.silhouette : nan),
                       num(e.metrics ? m.knn_acc : nan));
  }
  return out;
}

TrainingSession::TrainingSession(const DatasetBundle& data, const TrainerConfig& cfg,
                                 std::uint64_t stream_seed, TrainHooks hooks)
    : data_(data),
      cfg_(cfg),
      hooks_(std::move(hooks)),
      shuffle_rng_(make_rng(stream_seed, "shuffle")),
      augment_rng_(make_rng(stream_seed, "augment")),
      noise_rng_(make_rng(stream_seed, "predictor-noise")) {
  cfg_.validate();
  const Matrix& x = data.features.values();
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  input_std_.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) input_std_[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
  }
  for (double& s : input_std_) s = std::sqrt(s / static_cast<double>(n));
  jitter_scale_ = input_std_;
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  // A trailing singleton cannot form a neighbour table.
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

EpochRecord TrainingSession::train_epoch(DualNetworks& nets, const LabelVector* pseudo, int epoch,
                                         Phase phase, std::optional<double> lr_override) {
  const Matrix& x_all = data_.features.values();
  const double lr = lr_override.value_or(cfg_.effective_lr());
  const double lr_pred = lr * cfg_.predictor_lr_mult;

  // Pseudo-to-truth map for selection diagnostics; never used for training.
  std::vector<int> truth_map;
  if (pseudo && data_.truth) truth_map = best_label_map(*pseudo, *data_.truth);
  auto correct = [&](std::size_t sample) {
    const int p = (*pseudo)[sample];
    return static_cast<std::size_t>(p) < truth_map.size() && truth_map[static_cast<std::size_t>(p)] == (*data_.truth)[sample];
  };

  EpochRecord rec;
  rec.epoch = epoch;
  rec.phase = phase;
  std::vector<double> lpos, lneg, lins, ltot, kstars, precisions, accs;
  std::size_t selected = 0, seen = 0;
  std::normal_distribution<double> normal(0.0, 1.0);

  for (const auto& idx : make_batches(x_all.rows(), cfg_.batch_size, shuffle_rng_)) {
    const Matrix x = x_all.gather_rows(idx);
    const Matrix v1 = augment(x, cfg_.augment, jitter_scale_, augment_rng_);
    const Matrix v2 = augment(x, cfg_.augment, jitter_scale_, augment_rng_);

    const ForwardCache fo = forward(nets.online, v1);
    const Matrix z_t = infer(nets.target, v2);
    Matrix pred_in = fo.output;
    for (double& v : pred_in.values()) v += cfg_.sigma * normal(noise_rng_);
    const ForwardCache fp = forward(nets.predictor, pred_in);

    BatchRecord br;
    br.size = idx.size();
    std::vector<ClassGroup> groups;
    if (pseudo) {
      LabelVector labels = pseudo->gather(idx);
      std::optional<FeatureMatrix> zo_view;
      if (cfg_.filter.retrieval_source == RetrievalSource::online_target_hybrid) {
        zo_view.emplace(fo.output, true);
      }
      BatchView view(idx, FeatureMatrix(z_t, true), std::move(zo_view), labels);
      SelectionResult sel = select_high_confidence(view, cfg_.filter);
      br.m_eff = static_cast<int>(sel.counts.size());
      br.k_star = sel.k_star;
      br.count_at_k_star = sel.counts[static_cast<std::size_t>(sel.k_star - 1)];
      br.xh_size = sel.x_h.size();
      groups = make_groups(sel.x_h, labels);
      if (data_.truth) {
        std::size_t ok_sel = 0, ok_all = 0;
        for (std::size_t p = 0; p < idx.size(); ++p) {
          const bool ok = correct(idx[p]);
          ok_all += ok;
          if (sel.mask[p]) ok_sel += ok;
        }
        br.pseudo_acc = static_cast<double>(ok_all) / static_cast<double>(idx.size());
        if (!sel.x_h.empty()) br.precision = static_cast<double>(ok_sel) / static_cast<double>(sel.x_h.size());
      }
      if (hooks_.on_batch) {
        hooks_.on_batch(BatchCapture{idx, z_t, fo.output, std::move(labels), std::move(sel)});
      }
    }

    const LossBreakdown loss = total_loss(fo.output, z_t, fp.output, z_t, groups, cfg_.weight_mode);
    const BackwardResult gp = backward(nets.predictor, fp, loss.grad_pred);
    Matrix grad_zo = loss.grad_z_o;
    for (std::size_t k = 0; k < grad_zo.size(); ++k) grad_zo.values()[k] += gp.grad_input.values()[k];
    const BackwardResult go = backward(nets.online, fo, grad_zo);

    if (hooks_.on_step) hooks_.on_step(StepStage::before_step, nets);
    sgd_step(nets.online, go.grads, lr);
    sgd_step(nets.predictor, gp.grads, lr_pred);
    if (hooks_.on_step) hooks_.on_step(StepStage::after_sgd, nets);
    ema_update(nets.online, nets.target, cfg_.ema_momentum);
    if (hooks_.on_step) hooks_.on_step(StepStage::after_ema, nets);

    br.l_pos = loss.l_pos;
    br.l_neg = loss.l_neg;
    br.l_ins = loss.l_ins;
    lpos.push_back(loss.l_pos);
    lneg.push_back(loss.l_neg);
    lins.push_back(loss.l_ins);
    ltot.push_back(loss.total);
    if (pseudo) {
      kstars.push_back(br.k_star);
      selected += br.xh_size;
      seen += br.size;
      if (std::isfinite(br.precision)) precisions.push_back(br.precision);
      if (std::isfinite(br.pseudo_acc)) accs.push_back(br.pseudo_acc);
    }
    rec.batches.push_back(br);
  }

  rec.l_pos = mean_of(lpos);
  rec.l_neg = mean_of(lneg);
  rec.l_ins = mean_of(lins);
  rec.l_total = mean_of(ltot);
  if (pseudo) {
    rec.kstar_mean = mean_of(kstars);
    rec.xh_frac = static_cast<double>(selected) / static_cast<double>(seen);
    rec.sel_precision = mean_of(precisions);
    rec.batch_pseudo_acc = mean_of(accs);
  }
  return rec;
}

FeatureMatrix embed(const MLPNetwork& encoder, const FeatureMatrix& x) {
  return FeatureMatrix(infer(encoder, x.values()), true);
}

LabelVector pseudo_labels(const FeatureMatrix& embeddings, const TrainerConfig& cfg, int round) {
  KMeansConfig kc = cfg.kmeans;
  kc.seed = derive_seed(cfg.seed, "kmeans", static_cast<std::uint64_t>(round));
  const KMeansModel model = kmeans_fit(embeddings, kc);
  return assign(model, embeddings);
}

PretrainResult pretrain_baseline(const DatasetBundle& data, const TrainerConfig& cfg) {
  cfg.validate();
  const std::uint64_t seed = derive_seed(cfg.seed, "pretrain");
  DualNetworks nets = init_networks(data.features.d(), cfg, seed);
  PretrainResult result;
  TrainingSession session(data, cfg, seed);
  for (int e = 1; e <= cfg.pretrain_epochs; ++e) {
    result.history.epochs.push_back(session.train_epoch(nets, nullptr, e, Phase::pretrain));
  }
  // The trained encoder plays the role of the existing clustering model:
  // it seeds both branches, and the predictor starts over.
  result.nets = {nets.online, nets.online, init_predictor(cfg, derive_seed(cfg.seed, "boost-predictor"))};

  if (data.truth) {
    const FeatureMatrix z = embed(result.nets.target, data.features);
    const double a = acc(pseudo_labels(z, cfg, -1), *data.truth);
    result.kmeans_acc = a;
    const auto counts = data.truth->class_counts();
    const double chance = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                          static_cast<double>(data.n());
    if (!(a > chance && a < 1.0)) {
      spdlog::warn("pre-trained k-means ACC {:.4f} leaves no headroom (chance {:.4f})", a, chance);
    }
  }
  return result;
}

std::vector<EpochRecord> warmup(DualNetworks& nets, const DatasetBundle&, const TrainerConfig& cfg,
                                TrainingSession& session) {
  std::vector<EpochRecord> out;
  for (int e = 1; e <= cfg.warmup_epochs; ++e) {
    out.push_back(session.train_epoch(nets, nullptr, e, Phase::warmup));
  }
  return out;
}

EpochRecord train_epoch(DualNetworks& nets, const LabelVector& pseudo, TrainingSession& session, int epoch) {
  return session.train_epoch(nets, &pseudo, epoch, Phase::boost);
}

BoostResult run_boost(const DatasetBundle& data, DualNetworks nets, const TrainerConfig& cfg,
                      const TrainHooks& hooks) {
  cfg.validate();
  if (nets.online.input_dim() != data.features.d()) {
    throw ShapeError("pre-trained encoder does not match the dataset width");
  }
  TrainingSession session(data, cfg, derive_seed(cfg.seed, "boost"), hooks);
  TrainHistory history;
  int round = 0;
  auto evaluate_now = [&](int epoch, const FeatureMatrix& z, const LabelVector& labels) -> std::optional<MetricsReport> {
    if (cfg.eval_every <= 0 || epoch % cfg.eval_every != 0) return std::nullopt;
    EvalOptions opts = cfg.eval;
    opts.silhouette.seed = derive_seed(cfg.seed, "eval", static_cast<std::uint64_t>(epoch));
    return evaluate(z, labels, data.truth, opts);
  };

  int epoch = 0;
  for (int w = 0; w < cfg.warmup_epochs; ++w) {
    ++epoch;
    EpochRecord rec = session.train_epoch(nets, nullptr, epoch, Phase::warmup);
    if (cfg.eval_every > 0 && epoch % cfg.eval_every == 0) {
      const FeatureMatrix z = embed(nets.target, data.features);
      rec.metrics = evaluate_now(epoch, z, pseudo_labels(z, cfg, round++));
    }
    history.epochs.push_back(std::move(rec));
  }

  FeatureMatrix z = embed(nets.target, data.features);
  LabelVector labels = pseudo_labels(z, cfg, round++);
  for (int b = 0; b < cfg.boost_epochs; ++b) {
    ++epoch;
    EpochRecord rec = train_epoch(nets, labels, session, epoch);
    z = embed(nets.target, data.features);
    labels = pseudo_labels(z, cfg, round++);
    rec.metrics = evaluate_now(epoch, z, labels);
    history.epochs.push_back(std::move(rec));
  }

  EvalOptions final_opts = cfg.eval;
  final_opts.silhouette.subsample_above = 0;
  MetricsReport final_metrics = evaluate(z, labels, data.truth, final_opts);
  return BoostResult{std::move(nets), std::move(history), std::move(labels), std::move(z),
                     std::move(final_metrics)};
}

}  // namespace dcboost
