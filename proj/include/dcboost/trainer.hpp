#pragma once

// Boosting loop: an online encoder and predictor trained by SGD, a target
// encoder tracking the online one by EMA, per-epoch k-means pseudo-labels on
// the target output, and per-batch high-confidence selection feeding the
// discriminative loss.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dcboost/feature_store.hpp"
#include "dcboost/knn_filter.hpp"
#include "dcboost/losses.hpp"
#include "dcboost/metrics.hpp"
#include "dcboost/network.hpp"
#include "dcboost/pseudo_labeler.hpp"

namespace dcboost {

struct AugmentConfig {
  // Gaussian jitter std as a fraction of each input dimension's data std.
  double jitter_std = 0.05;
  double dropout_prob = 0.1;

  void validate() const;
};

/// Adds N(0, (jitter_std * scale_j)^2) to every entry, then zeroes each
/// coordinate independently with probability dropout_prob. An empty `scale`
/// means unit scale.
Matrix augment(const Matrix& x, const AugmentConfig& cfg, std::span<const double> scale, Rng& rng);

struct TrainerConfig {
  std::size_t batch_size = 256;
  double base_lr = 0.05;
  double predictor_lr_mult = 10.0;
  double ema_momentum = 0.996;
  int pretrain_epochs = 20;
  int warmup_epochs = 10;
  int boost_epochs = 50;
  double sigma = 0.001;
  WeightMode weight_mode = WeightMode::w_ours_flow;
  std::vector<std::size_t> encoder_hidden = {64};
  std::size_t encoder_out = 32;
  std::size_t predictor_hidden = 0;  // 0 = 2 * encoder_out
  int eval_every = 1;                // per-epoch metrics cadence; 0 = final only
  FilterConfig filter;
  KMeansConfig kmeans;
  AugmentConfig augment;
  EvalOptions eval;
  std::uint64_t seed = 0;

  /// base_lr scaled linearly with batch_size / 256.
  double effective_lr() const;
  void validate() const;
};

struct DualNetworks {
  MLPNetwork online;
  MLPNetwork target;
  MLPNetwork predictor;

  bool operator==(const DualNetworks&) const = default;
};

/// Fresh encoder (online and target identical) and predictor.
DualNetworks init_networks(std::size_t input_dim, const TrainerConfig& cfg, std::uint64_t seed);
MLPNetwork init_predictor(const TrainerConfig& cfg, std::uint64_t seed);

void save_checkpoint(const DualNetworks& nets, const std::filesystem::path& path);
DualNetworks load_checkpoint(const std::filesystem::path& path);

struct BatchRecord {
  std::size_t size = 0;
  int m_eff = 0;
  int k_star = 0;
  std::int64_t count_at_k_star = 0;
  std::size_t xh_size = 0;
  double precision = std::numeric_limits<double>::quiet_NaN();   // truth purity of x_h
  double pseudo_acc = std::numeric_limits<double>::quiet_NaN();  // truth accuracy of the batch
  double l_pos = 0.0, l_neg = 0.0, l_ins = 0.0;
};

enum class Phase { pretrain, warmup, boost };

struct EpochRecord {
  int epoch = 0;
  Phase phase = Phase::boost;
  double l_pos = 0.0, l_neg = 0.0, l_ins = 0.0, l_total = 0.0;  // batch means
  double kstar_mean = std::numeric_limits<double>::quiet_NaN();
  double xh_frac = std::numeric_limits<double>::quiet_NaN();
  double sel_precision = std::numeric_limits<double>::quiet_NaN();
  double batch_pseudo_acc = std::numeric_limits<double>::quiet_NaN();
  std::optional<MetricsReport> metrics;
  std::vector<BatchRecord> batches;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  static constexpr const char* kCsvHeader =
      "epoch,l_pos,l_neg,l_ins,l_total,kstar_mean,xh_frac,sel_precision,nmi,acc,ari,silhouette,knn_acc";
  std::string to_csv() const;
};

enum class StepStage { before_step, after_sgd, after_ema };

/// Everything the selection saw for one batch, for replay checks.
struct BatchCapture {
  std::vector<std::size_t> indices;
  Matrix z_t;
  Matrix z_o;
  LabelVector labels;
  SelectionResult selection;
};

struct TrainHooks {
  std::function<void(StepStage, const DualNetworks&)> on_step;
  std::function<void(const BatchCapture&)> on_batch;
};

/// Per-run state: data statistics and the seeded random streams for
/// shuffling, augmentation and predictor-input noise.
class TrainingSession {
 public:
  TrainingSession(const DatasetBundle& data, const TrainerConfig& cfg, std::uint64_t stream_seed,
                  TrainHooks hooks = {});

  /// One pass over shuffled batches. With `pseudo` null only the instance
  /// term is optimized (pre-training and warm-up); otherwise every batch runs
  /// selection and the full loss. `lr` overrides the effective learning rate.
  EpochRecord train_epoch(DualNetworks& nets, const LabelVector* pseudo, int epoch, Phase phase,
                          std::optional<double> lr = std::nullopt);

  const std::vector<double>& input_std() const { return input_std_; }

 private:
  const DatasetBundle& data_;
  const TrainerConfig& cfg_;
  TrainHooks hooks_;
  std::vector<double> input_std_;
  std::vector<double> jitter_scale_;
  Rng shuffle_rng_;
  Rng augment_rng_;
  Rng noise_rng_;
};

/// Target-encoder embeddings of the (unaugmented) dataset.
FeatureMatrix embed(const MLPNetwork& encoder, const FeatureMatrix& x);

/// k-means pseudo-labels on the target embeddings. `round` varies the seed.
LabelVector pseudo_labels(const FeatureMatrix& embeddings, const TrainerConfig& cfg, int round);

struct PretrainResult {
  DualNetworks nets;
  TrainHistory history;
  std::optional<double> kmeans_acc;  // when truth labels exist
};

/// Instance-loss-only training from random initialization. The trained
/// online encoder becomes both online and target of the returned networks,
/// and the predictor is re-initialized.
PretrainResult pretrain_baseline(const DatasetBundle& data, const TrainerConfig& cfg);

/// L_ins-only epochs with EMA updates every step.
std::vector<EpochRecord> warmup(DualNetworks& nets, const DatasetBundle& data, const TrainerConfig& cfg,
                                TrainingSession& session);

/// One boosting epoch with the given (full-dataset) pseudo-labels.
EpochRecord train_epoch(DualNetworks& nets, const LabelVector& pseudo, TrainingSession& session,
                        int epoch);

struct BoostResult {
  DualNetworks nets;
  TrainHistory history;
  LabelVector final_labels;
  FeatureMatrix final_embeddings;
  MetricsReport final_metrics;  // exact silhouette; clustering scores need truth
};

BoostResult run_boost(const DatasetBundle& data, DualNetworks pretrained, const TrainerConfig& cfg,
                      const TrainHooks& hooks = {});

}  // namespace dcboost
