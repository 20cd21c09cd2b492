#pragma once

// Flat key=value experiment configuration. Keys carry a section prefix
// ("filter.m=50", "trainer.batch_size=128"); '#' starts a comment. Unknown
// keys and invalid values are rejected with the offending key and line.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dcboost/feature_store.hpp"
#include "dcboost/trainer.hpp"

namespace dcboost {

struct SelectOptions {
  bool run_kmeans = false;  // compute pseudo-labels by k-means before selecting
  bool k_sweep = false;     // write the full score curve per batch
};

struct RunConfig {
  SynthConfig synth;
  TrainerConfig trainer;
  SelectOptions select;
  std::uint64_t seed = 0;

  /// Pushes the master seed into every module config and checks invariants.
  void finalize();
};

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every recognised key with its current value, one per line.
std::string to_config_text(const RunConfig& cfg);

}  // namespace dcboost
