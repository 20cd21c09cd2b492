#pragma once

// Implementations of the CLI subcommands. Each command is a pure function of
// its input files, configuration and seed.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcboost/feature_store.hpp"
#include "dcboost/metrics.hpp"
#include "dcboost/run_config.hpp"
#include "dcboost/trainer.hpp"

namespace dcboost {

void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out, DataFormat format);

struct BatchSelection {
  std::size_t batch = 0;
  std::size_t size = 0;
  int m_eff = 0;
  int k_star = 0;
  std::size_t xh_size = 0;
  double precision = std::numeric_limits<double>::quiet_NaN();
  double pseudo_acc = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::int64_t> counts;
  std::vector<double> scores;
};

struct SelectReport {
  std::vector<BatchSelection> batches;
  std::map<int, std::size_t> kstar_histogram;
  double xh_frac = 0.0;
  double precision = std::numeric_limits<double>::quiet_NaN();   // mean over batches
  double pseudo_acc = std::numeric_limits<double>::quiet_NaN();  // mean over batches

  std::string batches_csv() const;
  std::string scores_csv() const;
  std::string summary() const;
};

/// Batch-wise selection on the dataset's own (normalized) features.
SelectReport cmd_select(const DatasetBundle& data, const RunConfig& cfg);
void write_select_outputs(const SelectReport& report, const RunConfig& cfg,
                          const std::filesystem::path& out_dir);

struct BoostOutputs {
  BoostResult result;
  MetricsReport baseline;  // pre-trained networks, before boosting
};

/// Pre-trains (or loads `checkpoint`), boosts, and writes pretrained.dcbm,
/// boosted.dcbm, history.csv, labels.csv, baseline_metrics.json and
/// final_metrics.json into out_dir.
BoostOutputs cmd_boost(const DatasetBundle& data, const RunConfig& cfg, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

/// Metrics of a labelling. Labels come from `labels_path`, or from k-means on
/// the embeddings of `checkpoint`, or from the dataset's pseudo labels.
struct EvalRequest {
  std::optional<std::filesystem::path> labels_path;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> json_out;
  std::optional<std::filesystem::path> embeddings_out;
};
MetricsReport cmd_eval(const DatasetBundle& data, const RunConfig& cfg, const EvalRequest& req);

void write_labels(const LabelVector& labels, const std::filesystem::path& path);
LabelVector read_labels(const std::filesystem::path& path);

}  // namespace dcboost
