#include "dcboost/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dcboost/error.hpp"
#include "dcboost/knn_filter.hpp"
#include "dcboost/rng.hpp"

namespace dcboost {

namespace {

std::string num(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string("nan"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  os << text;
  if (!os) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
}

double mean_finite(const std::vector<double>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out, DataFormat format) {
  save_dataset(generate_gaussian_mixture(cfg.synth), out, format);
}

std::string SelectReport::batches_csv() const {
  std::string out = "batch,n_b,m_eff,k_star,xh_size,xh_frac,precision,pseudo_acc\n";
  for (const auto& b : batches) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", b.batch, b.size, b.m_eff, b.k_star, b.xh_size,
                       num(static_cast<double>(b.xh_size) / static_cast<double>(b.size)), num(b.precision),
                       num(b.pseudo_acc));
  }
  return out;
}

std::string SelectReport::scores_csv() const {
  std::string out = "batch,k,count,score\n";
  for (const auto& b : batches) {
    for (std::size_t k = 0; k < b.scores.size(); ++k) {
      out += fmt::format("{},{},{},{}\n", b.batch, k + 1, b.counts[k], num(b.scores[k]));
    }
  }
  return out;
}

std::string SelectReport::summary() const {
  std::string out;
  out += fmt::format("batches={}\n", batches.size());
  out += fmt::format("xh_frac={}\n", num(xh_frac));
  out += fmt::format("precision={}\n", num(precision));
  out += fmt::format("pseudo_acc={}\n", num(pseudo_acc));
  out += "kstar_histogram=";
  bool first = true;
  for (const auto& [k, c] : kstar_histogram) {
    out += fmt::format("{}{}:{}", first ? "" : ",", k, c);
    first = false;
  }
  out += '\n';
  return out;
}

SelectReport cmd_select(const DatasetBundle& data, const RunConfig& cfg) {
  const FeatureMatrix z = l2_normalize(data.features);
  LabelVector pseudo;
  if (cfg.select.run_kmeans) {
    pseudo = pseudo_labels(z, cfg.trainer, 0);
  } else if (data.pseudo) {
    pseudo = *data.pseudo;
  } else {
    throw ConfigError("dataset has no pseudo labels; set select.kmeans=true to compute them");
  }
  std::vector<int> truth_map;
  if (data.truth) truth_map = best_label_map(pseudo, *data.truth);

  std::vector<std::size_t> order(data.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(cfg.seed, "select-shuffle");
  std::shuffle(order.begin(), order.end(), rng);

  SelectReport report;
  std::size_t selected = 0;
  std::vector<double> precisions, accs;
  const std::size_t bs = cfg.trainer.batch_size;
  for (std::size_t start = 0, b = 0; start < data.n(); start += bs, ++b) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(std::min(data.n(), start + bs)));
    if (idx.size() < 2) break;
    LabelVector labels = pseudo.gather(idx);
    BatchView view(idx, z.gather_rows(idx), std::nullopt, labels);
    FilterConfig fc = cfg.trainer.filter;
    fc.retrieval_source = RetrievalSource::target_only;
    const SelectionResult sel = select_high_confidence(view, fc);

    BatchSelection row;
    row.batch = b;
    row.size = idx.size();
    row.m_eff = static_cast<int>(sel.counts.size());
    row.k_star = sel.k_star;
    row.xh_size = sel.x_h.size();
    row.counts = sel.counts;
    row.scores = sel.scores;
    if (data.truth) {
      std::size_t ok_all = 0, ok_sel = 0;
      for (std::size_t p = 0; p < idx.size(); ++p) {
        const int m = truth_map[static_cast<std::size_t>(labels[p])];
        const bool ok = m == (*data.truth)[idx[p]];
        ok_all += ok;
        if (sel.mask[p]) ok_sel += ok;
      }
      row.pseudo_acc = static_cast<double>(ok_all) / static_cast<double>(idx.size());
      if (!sel.x_h.empty()) row.precision = static_cast<double>(ok_sel) / static_cast<double>(sel.x_h.size());
    }
    selected += row.xh_size;
    precisions.push_back(row.precision);
    accs.push_back(row.pseudo_acc);
    ++report.kstar_histogram[row.k_star];
    report.batches.push_back(std::move(row));
  }
  report.xh_frac = static_cast<double>(selected) / static_cast<double>(data.n());
  report.precision = mean_finite(precisions);
  report.pseudo_acc = mean_finite(accs);
  return report;
}

void write_select_outputs(const SelectReport& report, const RunConfig& cfg, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  write_text(out_dir / "select_batches.csv", report.batches_csv());
  if (cfg.select.k_sweep) write_text(out_dir / "select_scores.csv", report.scores_csv());
  write_text(out_dir / "select_summary.txt", report.summary());
}

void write_labels(const LabelVector& labels, const std::filesystem::path& path) {
  std::string out = "id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out += fmt::format("{},{}\n", i, labels[i]);
  write_text(path, out);
}

LabelVector read_labels(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<int> labels;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
    int v = 0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || p != field.data() + field.size()) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw FormatError(fmt::format("bad label line '{}' in '{}'", line, path.string()));
    }
    if (v < 0) throw ValueError("negative label");
    first = false;
    labels.push_back(v);
  }
  return LabelVector::from_labels(std::move(labels));
}

BoostOutputs cmd_boost(const DatasetBundle& data, const RunConfig& cfg, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& checkpoint) {
  ensure_dir(out_dir);
  DualNetworks pretrained;
  if (checkpoint) {
    pretrained = load_checkpoint(*checkpoint);
  } else {
    pretrained = pretrain_baseline(data, cfg.trainer).nets;
  }
  save_checkpoint(pretrained, out_dir / "pretrained.dcbm");

  const FeatureMatrix z0 = embed(pretrained.target, data.features);
  MetricsReport baseline = evaluate(z0, pseudo_labels(z0, cfg.trainer, -1), data.truth,
                                    EvalOptions{cfg.trainer.eval.knn_k, {}});
  write_text(out_dir / "baseline_metrics.json", baseline.to_json() + "\n");

  BoostResult result = run_boost(data, std::move(pretrained), cfg.trainer);
  save_checkpoint(result.nets, out_dir / "boosted.dcbm");
  write_text(out_dir / "history.csv", result.history.to_csv());
  write_labels(result.final_labels, out_dir / "labels.csv");
  write_text(out_dir / "final_metrics.json", result.final_metrics.to_json() + "\n");
  write_text(out_dir / "final_metrics.txt", result.final_metrics.to_key_value());
  return {std::move(result), std::move(baseline)};
}

MetricsReport cmd_eval(const DatasetBundle& data, const RunConfig& cfg, const EvalRequest& req) {
  FeatureMatrix z = l2_normalize(data.features);
  LabelVector labels;
  if (req.checkpoint) {
    const DualNetworks nets = load_checkpoint(*req.checkpoint);
    z = embed(nets.target, data.features);
    labels = req.labels_path ? read_labels(*req.labels_path) : pseudo_labels(z, cfg.trainer, -1);
  } else if (req.labels_path) {
    labels = read_labels(*req.labels_path);
  } else if (data.pseudo) {
    labels = *data.pseudo;
  } else {
    throw ConfigError("eval needs --labels, --checkpoint, or a dataset with pseudo labels");
  }
  if (labels.size() != data.n()) {
    throw ShapeError(fmt::format("{} labels for {} samples", labels.size(), data.n()));
  }
  EvalOptions opts{cfg.trainer.eval.knn_k, {}};
  MetricsReport report = evaluate(z, labels, data.truth, opts);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  if (req.json_out) write_text(*req.json_out, report.to_json() + "\n");
  if (req.embeddings_out) {
    DatasetBundle emb(z, data.truth);
    save_dataset(emb, *req.embeddings_out, DataFormat::csv);
  }
  return report;
}

}  // namespace dcboost
