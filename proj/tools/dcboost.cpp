// dcboost command-line driver: synth, select, boost, eval.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dcboost/commands.hpp"
#include "dcboost/error.hpp"

namespace fs = std::filesystem;
using namespace dcboost;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "key=value config file");
  sub->add_option("--seed", args.seed, "master seed (overrides config)");
  sub->add_option("--format", args.format, "dataset format: dcbf or csv (default: by extension)");
}

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = args.config.empty() ? RunConfig{} : load_run_config(args.config);
  if (args.seed) cfg.seed = *args.seed;
  cfg.finalize();
  return cfg;
}

DataFormat resolve_format(const CommonArgs& args, const fs::path& path) {
  return args.format.empty() ? format_from_path(path) : parse_data_format(args.format);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep-clustering booster on feature vectors"};
  app.require_subcommand(1);

  CommonArgs synth_args, select_args, boost_args, eval_args;
  std::string select_data, boost_data, eval_data;
  std::string boost_checkpoint, eval_labels, eval_checkpoint, eval_json, eval_embeddings;

  auto* synth = app.add_subcommand("synth", "generate a Gaussian-mixture dataset");
  add_common(synth, synth_args);
  synth->add_option("--out", synth_args.out, "output dataset path")->required();

  auto* select = app.add_subcommand("select", "run high-confidence selection on a dataset");
  add_common(select, select_args);
  select->add_option("data", select_data, "dataset path")->required();
  select->add_option("--out", select_args.out, "output directory")->required();

  auto* boost = app.add_subcommand("boost", "pre-train (or load) and boost");
  add_common(boost, boost_args);
  boost->add_option("data", boost_data, "dataset path")->required();
  boost->add_option("--out", boost_args.out, "output directory")->required();
  boost->add_option("--checkpoint", boost_checkpoint, "pre-trained networks to start from");

  auto* eval = app.add_subcommand("eval", "metrics for a labelling");
  add_common(eval, eval_args);
  eval->add_option("data", eval_data, "dataset path")->required();
  eval->add_option("--labels", eval_labels, "labels CSV (id,label)");
  eval->add_option("--checkpoint", eval_checkpoint, "networks whose embeddings are clustered");
  eval->add_option("--json", eval_json, "also write the report as JSON");
  eval->add_option("--export-embeddings", eval_embeddings, "write embeddings as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const RunConfig cfg = load_config(synth_args);
      const fs::path out = synth_args.out;
      cmd_synth(cfg, out, resolve_format(synth_args, out));
    } else if (*select) {
      const RunConfig cfg = load_config(select_args);
      const DatasetBundle data = load_dataset(select_data, resolve_format(select_args, select_data));
      const SelectReport report = cmd_select(data, cfg);
      write_select_outputs(report, cfg, select_args.out);
      std::cout << report.summary();
    } else if (*boost) {
      const RunConfig cfg = load_config(boost_args);
      const DatasetBundle data = load_dataset(boost_data, resolve_format(boost_args, boost_data));
      std::optional<fs::path> ckpt;
      if (!boost_checkpoint.empty()) ckpt = boost_checkpoint;
      const BoostOutputs res = cmd_boost(data, cfg, boost_args.out, ckpt);
      std::cout << "# baseline\n" << res.baseline.to_key_value() << "# final\n"
                << res.result.final_metrics.to_key_value();
    } else if (*eval) {
      const RunConfig cfg = load_config(eval_args);
      const DatasetBundle data = load_dataset(eval_data, resolve_format(eval_args, eval_data));
      EvalRequest req;
      if (!eval_labels.empty()) req.labels_path = eval_labels;
      if (!eval_checkpoint.empty()) req.checkpoint = eval_checkpoint;
      if (!eval_json.empty()) req.json_out = eval_json;
      if (!eval_embeddings.empty()) req.embeddings_out = eval_embeddings;
      std::cout << cmd_eval(data, cfg, req).to_key_value();
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
