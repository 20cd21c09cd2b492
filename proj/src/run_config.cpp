#include "dcboost/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "dcboost/error.hpp"

namespace dcboost {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ValueError("expected a real number");
  return out;
}

long long to_int(std::string_view v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ValueError("expected an integer");
  return out;
}

std::uint64_t to_u64(std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ValueError("expected a non-negative integer");
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValueError("expected true/false");
}

std::vector<std::size_t> to_size_list(std::string_view v) {
  std::vector<std::size_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (!item.empty()) {
      const auto x = to_int(item);
      if (x < 0) throw ValueError("list entries must be non-negative");
      out.push_back(static_cast<std::size_t>(x));
    }
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string size_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <typename T>
T positive(T x, const char* what) {
  if (!(x > 0)) throw ValueError(fmt::format("{} must be > 0", what));
  return x;
}

template <typename T>
T non_negative(T x, const char* what) {
  if (!(x >= 0)) throw ValueError(fmt::format("{} must be >= 0", what));
  return x;
}

struct Key {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Key, std::less<>>& keys() {
  auto g = [](double v) { return fmt::format("{}", v); };
  static const std::map<std::string, Key, std::less<>> table = {
      {"seed", {[](RunConfig& c, std::string_view v) { c.seed = to_u64(v); },
                [](const RunConfig& c) { return std::to_string(c.seed); }}},
      // synth
      {"synth.c", {[](RunConfig& c, std::string_view v) {
                     const auto x = to_int(v);
                     if (x < 2) throw ValueError("synth.c must be >= 2");
                     c.synth.c = static_cast<int>(x);
                   },
                   [](const RunConfig& c) { return std::to_string(c.synth.c); }}},
      {"synth.d", {[](RunConfig& c, std::string_view v) { c.synth.d = static_cast<int>(positive(to_int(v), "synth.d")); },
                   [](const RunConfig& c) { return std::to_string(c.synth.d); }}},
      {"synth.n", {[](RunConfig& c, std::string_view v) { c.synth.n = static_cast<std::size_t>(positive(to_int(v), "synth.n")); },
                   [](const RunConfig& c) { return std::to_string(c.synth.n); }}},
      {"synth.per_class", {[](RunConfig& c, std::string_view v) { c.synth.per_class = to_size_list(v); },
                           [](const RunConfig& c) { return size_list(c.synth.per_class); }}},
      {"synth.imbalance_ratio", {[](RunConfig& c, std::string_view v) {
                                   const double x = to_double(v);
                                   if (!(x >= 1.0)) throw ValueError("synth.imbalance_ratio must be >= 1");
                                   c.synth.imbalance_ratio = x;
                                 },
                                 [g](const RunConfig& c) { return g(c.synth.imbalance_ratio); }}},
      {"synth.mean_separation", {[](RunConfig& c, std::string_view v) { c.synth.mean_separation = positive(to_double(v), "synth.mean_separation"); },
                                 [g](const RunConfig& c) { return g(c.synth.mean_separation); }}},
      {"synth.within_std", {[](RunConfig& c, std::string_view v) { c.synth.within_std = positive(to_double(v), "synth.within_std"); },
                            [g](const RunConfig& c) { return g(c.synth.within_std); }}},
      // filter
      {"filter.m", {[](RunConfig& c, std::string_view v) { c.trainer.filter.m = static_cast<int>(positive(to_int(v), "filter.m")); },
                    [](const RunConfig& c) { return std::to_string(c.trainer.filter.m); }}},
      {"filter.fixed_k", {[](RunConfig& c, std::string_view v) {
                            if (v == "none" || v.empty()) {
                              c.trainer.filter.fixed_k.reset();
                            } else {
                              c.trainer.filter.fixed_k = static_cast<int>(positive(to_int(v), "filter.fixed_k"));
                            }
                          },
                          [](const RunConfig& c) {
                            return c.trainer.filter.fixed_k ? std::to_string(*c.trainer.filter.fixed_k) : std::string("none");
                          }}},
      {"filter.retrieval_source", {[](RunConfig& c, std::string_view v) { c.trainer.filter.retrieval_source = parse_retrieval_source(v); },
                                   [](const RunConfig& c) { return std::string(to_string(c.trainer.filter.retrieval_source)); }}},
      // kmeans
      {"kmeans.c", {[](RunConfig& c, std::string_view v) {
                      const auto x = to_int(v);
                      if (x < 2) throw ValueError("kmeans.c must be >= 2");
                      c.trainer.kmeans.c = static_cast<int>(x);
                    },
                    [](const RunConfig& c) { return std::to_string(c.trainer.kmeans.c); }}},
      {"kmeans.max_iter", {[](RunConfig& c, std::string_view v) { c.trainer.kmeans.max_iter = static_cast<int>(positive(to_int(v), "kmeans.max_iter")); },
                           [](const RunConfig& c) { return std::to_string(c.trainer.kmeans.max_iter); }}},
      {"kmeans.tol", {[](RunConfig& c, std::string_view v) { c.trainer.kmeans.tol = positive(to_double(v), "kmeans.tol"); },
                      [g](const RunConfig& c) { return g(c.trainer.kmeans.tol); }}},
      {"kmeans.n_init", {[](RunConfig& c, std::string_view v) { c.trainer.kmeans.n_init = static_cast<int>(positive(to_int(v), "kmeans.n_init")); },
                         [](const RunConfig& c) { return std::to_string(c.trainer.kmeans.n_init); }}},
      // trainer
      {"trainer.batch_size", {[](RunConfig& c, std::string_view v) {
                                const auto x = to_int(v);
                                if (x < 2) throw ValueError("trainer.batch_size must be >= 2");
                                c.trainer.batch_size = static_cast<std::size_t>(x);
                              },
                              [](const RunConfig& c) { return std::to_string(c.trainer.batch_size); }}},
      {"trainer.base_lr", {[](RunConfig& c, std::string_view v) { c.trainer.base_lr = positive(to_double(v), "trainer.base_lr"); },
                           [g](const RunConfig& c) { return g(c.trainer.base_lr); }}},
      {"trainer.predictor_lr_mult", {[](RunConfig& c, std::string_view v) { c.trainer.predictor_lr_mult = positive(to_double(v), "trainer.predictor_lr_mult"); },
                                     [g](const RunConfig& c) { return g(c.trainer.predictor_lr_mult); }}},
      {"trainer.ema_momentum", {[](RunConfig& c, std::string_view v) {
                                  const double x = to_double(v);
                                  if (!(x >= 0.0 && x <= 1.0)) throw ValueError("trainer.ema_momentum must lie in [0, 1]");
                                  c.trainer.ema_momentum = x;
                                },
                                [g](const RunConfig& c) { return g(c.trainer.ema_momentum); }}},
      {"trainer.pretrain_epochs", {[](RunConfig& c, std::string_view v) { c.trainer.pretrain_epochs = static_cast<int>(non_negative(to_int(v), "trainer.pretrain_epochs")); },
                                   [](const RunConfig& c) { return std::to_string(c.trainer.pretrain_epochs); }}},
      {"trainer.warmup_epochs", {[](RunConfig& c, std::string_view v) { c.trainer.warmup_epochs = static_cast<int>(non_negative(to_int(v), "trainer.warmup_epochs")); },
                                 [](const RunConfig& c) { return std::to_string(c.trainer.warmup_epochs); }}},
      {"trainer.boost_epochs", {[](RunConfig& c, std::string_view v) { c.trainer.boost_epochs = static_cast<int>(non_negative(to_int(v), "trainer.boost_epochs")); },
                                [](const RunConfig& c) { return std::to_string(c.trainer.boost_epochs); }}},
      {"trainer.sigma", {[](RunConfig& c, std::string_view v) { c.trainer.sigma = non_negative(to_double(v), "trainer.sigma"); },
                         [g](const RunConfig& c) { return g(c.trainer.sigma); }}},
      {"trainer.weight_mode", {[](RunConfig& c, std::string_view v) { c.trainer.weight_mode = parse_weight_mode(v); },
                               [](const RunConfig& c) { return std::string(to_string(c.trainer.weight_mode)); }}},
      {"trainer.encoder_hidden", {[](RunConfig& c, std::string_view v) { c.trainer.encoder_hidden = to_size_list(v); },
                                  [](const RunConfig& c) { return size_list(c.trainer.encoder_hidden); }}},
      {"trainer.encoder_out", {[](RunConfig& c, std::string_view v) { c.trainer.encoder_out = static_cast<std::size_t>(positive(to_int(v), "trainer.encoder_out")); },
                               [](const RunConfig& c) { return std::to_string(c.trainer.encoder_out); }}},
      {"trainer.predictor_hidden", {[](RunConfig& c, std::string_view v) { c.trainer.predictor_hidden = static_cast<std::size_t>(non_negative(to_int(v), "trainer.predictor_hidden")); },
                                    [](const RunConfig& c) { return std::to_string(c.trainer.predictor_hidden); }}},
      {"trainer.eval_every", {[](RunConfig& c, std::string_view v) { c.trainer.eval_every = static_cast<int>(non_negative(to_int(v), "trainer.eval_every")); },
                              [](const RunConfig& c) { return std::to_string(c.trainer.eval_every); }}},
      {"trainer.knn_k", {[](RunConfig& c, std::string_view v) { c.trainer.eval.knn_k = static_cast<int>(positive(to_int(v), "trainer.knn_k")); },
                         [](const RunConfig& c) { return std::to_string(c.trainer.eval.knn_k); }}},
      {"trainer.silhouette_max_n", {[](RunConfig& c, std::string_view v) { c.trainer.eval.silhouette.subsample_above = static_cast<std::size_t>(non_negative(to_int(v), "trainer.silhouette_max_n")); },
                                    [](const RunConfig& c) { return std::to_string(c.trainer.eval.silhouette.subsample_above); }}},
      // augment
      {"augment.jitter_std", {[](RunConfig& c, std::string_view v) { c.trainer.augment.jitter_std = non_negative(to_double(v), "augment.jitter_std"); },
                              [g](const RunConfig& c) { return g(c.trainer.augment.jitter_std); }}},
      {"augment.dropout_prob", {[](RunConfig& c, std::string_view v) {
                                  const double x = to_double(v);
                                  if (!(x >= 0.0 && x < 1.0)) throw ValueError("augment.dropout_prob must lie in [0, 1)");
                                  c.trainer.augment.dropout_prob = x;
                                },
                                [g](const RunConfig& c) { return g(c.trainer.augment.dropout_prob); }}},
      // select
      {"select.kmeans", {[](RunConfig& c, std::string_view v) { c.select.run_kmeans = to_bool(v); },
                         [](const RunConfig& c) { return std::string(c.select.run_kmeans ? "true" : "false"); }}},
      {"select.k_sweep", {[](RunConfig& c, std::string_view v) { c.select.k_sweep = to_bool(v); },
                          [](const RunConfig& c) { return std::string(c.select.k_sweep ? "true" : "false"); }}},
  };
  return table;
}

}  // namespace

void RunConfig::finalize() {
  synth.seed = seed;
  trainer.seed = seed;
  trainer.kmeans.seed = seed;
  synth.validate();
  trainer.validate();
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  bool kmeans_c_set = false;
  std::istringstream is{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected key=value", line_no));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = keys().find(key);
    if (it == keys().end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
    try {
      it->second.set(cfg, value);
    } catch (const Error& e) {
      throw ConfigError(fmt::format("line {}: key '{}': {}", line_no, key, e.what()));
    }
    kmeans_c_set |= key == "kmeans.c";
  }
  if (!kmeans_c_set) cfg.trainer.kmeans.c = cfg.synth.c;
  try {
    cfg.finalize();
  } catch (const Error& e) {
    throw ConfigError(fmt::format("invalid configuration: {}", e.what()));
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, key] : keys()) out += fmt::format("{}={}\n", name, key.get(cfg));
  return out;
}

}  // namespace dcboost
