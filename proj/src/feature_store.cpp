#include "dcboost/feature_store.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "dcboost/error.hpp"
#include "dcboost/rng.hpp"

namespace dcboost {

namespace {

void check_finite(const Matrix& m) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) throw ValueError("feature matrix contains a non-finite value");
  }
}

}  // namespace

FeatureMatrix::FeatureMatrix(Matrix values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw ShapeError("feature matrix needs n >= 1 and d >= 1");
  }
  check_finite(values_);
  if (normalized_) {
    for (std::size_t i = 0; i < n(); ++i) {
      if (std::abs(std::sqrt(squared_norm(row(i))) - 1.0) > kUnitTolerance) {
        throw ValueError(fmt::format("row {} is flagged normalized but is not unit norm", i));
      }
    }
  }
}

FeatureMatrix::FeatureMatrix(std::size_t n, std::size_t d, std::vector<double> data,
                             bool normalized)
    : FeatureMatrix(Matrix(n, d, std::move(data)), normalized) {}

FeatureMatrix FeatureMatrix::gather_rows(std::span<const std::size_t> positions) const {
  return FeatureMatrix(values_.gather_rows(positions), normalized_);
}

LabelVector::LabelVector(std::vector<int> l, int c) : labels(std::move(l)), num_classes(c) {
  for (int v : labels) {
    if (v < 0 || v >= num_classes) {
      throw ValueError(fmt::format("label {} outside [0, {})", v, num_classes));
    }
  }
}

LabelVector LabelVector::from_labels(std::vector<int> l) {
  int c = 0;
  for (int v : l) c = std::max(c, v + 1);
  return LabelVector(std::move(l), c);
}

LabelVector LabelVector::gather(std::span<const std::size_t> positions) const {
  std::vector<int> out;
  out.reserve(positions.size());
  for (auto p : positions) out.push_back(labels[p]);
  return LabelVector(std::move(out), num_classes);
}

std::vector<std::size_t> LabelVector::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int v : labels) ++counts[static_cast<std::size_t>(v)];
  return counts;
}

DatasetBundle::DatasetBundle(FeatureMatrix f, std::optional<LabelVector> t,
                             std::optional<LabelVector> p)
    : features(std::move(f)), truth(std::move(t)), pseudo(std::move(p)), ids(features.n()) {
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  validate();
}

void DatasetBundle::validate() const {
  if (truth && truth->size() != n()) throw ShapeError("truth labels do not match n");
  if (pseudo && pseudo->size() != n()) throw ShapeError("pseudo labels do not match n");
  if (ids.size() != n()) throw ShapeError("ids do not match n");
}

DataFormat parse_data_format(std::string_view name) {
  if (name == "dcbf") return DataFormat::dcbf;
  if (name == "csv") return DataFormat::csv;
  throw ConfigError(fmt::format("unknown data format '{}'", name));
}

DataFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DataFormat::csv : DataFormat::dcbf;
}

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double norm = std::sqrt(squared_norm(r));
    if (!(norm >= 1e-12)) throw ZeroVectorError(fmt::format("row {} has zero norm", i));
    for (double& v : r) v /= norm;
  }
  return out;
}

FeatureMatrix l2_normalize(const FeatureMatrix& m) {
  return FeatureMatrix(l2_normalize_rows(m.values()), true);
}

// ---------------------------------------------------------------------------
// DCBF binary format

namespace {

constexpr char kMagic[4] = {'D', 'C', 'B', 'F'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw FormatError("unexpected end of DCBF file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

LabelVector read_labels(std::istream& is, std::size_t n) {
  std::vector<int> labels(n);
  for (auto& v : labels) {
    v = get_le<std::int32_t>(is);
    if (v < 0) throw ValueError("negative label in DCBF file");
  }
  return LabelVector::from_labels(std::move(labels));
}

DatasetBundle load_dcbf(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("cannot open '{}'", path.string()));
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(fmt::format("'{}' is not a DCBF file (bad magic)", path.string()));
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kVersion) throw FormatError(fmt::format("unsupported DCBF version {}", version));
  const auto n = get_le<std::uint64_t>(is);
  const auto d = get_le<std::uint32_t>(is);
  const auto has_truth = get_le<std::uint8_t>(is);
  const auto has_pseudo = get_le<std::uint8_t>(is);
  if (n == 0 || d == 0) throw ShapeError("DCBF header declares an empty matrix");

  std::vector<double> data(static_cast<std::size_t>(n) * d);
  for (auto& v : data) {
    v = get_le<double>(is);
    if (!std::isfinite(v)) throw ValueError("non-finite feature value in DCBF file");
  }
  FeatureMatrix features(static_cast<std::size_t>(n), d, std::move(data));
  std::optional<LabelVector> truth, pseudo;
  if (has_truth) truth = read_labels(is, static_cast<std::size_t>(n));
  if (has_pseudo) pseudo = read_labels(is, static_cast<std::size_t>(n));
  return DatasetBundle(std::move(features), std::move(truth), std::move(pseudo));
}

void save_dcbf(const DatasetBundle& b, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kVersion);
  put_le<std::uint64_t>(os, b.n());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.features.d()));
  put_le<std::uint8_t>(os, b.truth ? 1 : 0);
  put_le<std::uint8_t>(os, b.pseudo ? 1 : 0);
  for (double v : b.features.values().values()) put_le<double>(os, v);
  if (b.truth) for (int v : b.truth->labels) put_le<std::int32_t>(os, v);
  if (b.pseudo) for (int v : b.pseudo->labels) put_le<std::int32_t>(os, v);
  if (!os) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

DatasetBundle load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw FormatError("empty CSV file");

  bool has_header = false;
  bool label_column = false;
  {
    double tmp;
    for (const auto& f : rows.front()) {
      if (!parse_double(f, tmp)) has_header = true;
    }
    if (has_header) label_column = rows.front().back() == "label";
  }
  const std::size_t first_row = has_header ? 1 : 0;
  if (rows.size() <= first_row) throw FormatError("CSV file has no data rows");
  const std::size_t width = rows[first_row].size();
  if (has_header && rows.front().size() != width) throw ShapeError("CSV header width mismatch");
  const std::size_t d = label_column ? width - 1 : width;
  if (d == 0) throw ShapeError("CSV file has no feature columns");

  const std::size_t n = rows.size() - first_row;
  std::vector<double> data;
  data.reserve(n * d);
  std::vector<int> labels;
  for (std::size_t r = first_row; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    if (fields.size() != width) {
      throw ShapeError(fmt::format("CSV row {} has {} fields, expected {}", r + 1,
                                   fields.size(), width));
    }
    for (std::size_t j = 0; j < d; ++j) {
      double v;
      if (!parse_double(fields[j], v)) {
        throw FormatError(fmt::format("CSV row {} column {} is not numeric", r + 1, j + 1));
      }
      if (!std::isfinite(v)) throw ValueError(fmt::format("non-finite value in CSV row {}", r + 1));
      data.push_back(v);
    }
    if (label_column) {
      int lab = 0;
      const auto& s = fields.back();
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), lab);
      if (ec != std::errc() || ptr != s.data() + s.size() || lab < 0) {
        throw FormatError(fmt::format("CSV row {} has an invalid label '{}'", r + 1, s));
      }
      labels.push_back(lab);
    }
  }
  std::optional<LabelVector> truth;
  if (label_column) truth = LabelVector::from_labels(std::move(labels));
  return DatasetBundle(FeatureMatrix(n, d, std::move(data)), std::move(truth));
}

void save_csv(const DatasetBundle& b, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  const std::size_t d = b.features.d();
  for (std::size_t j = 0; j < d; ++j) os << (j ? "," : "") << 'f' << j;
  if (b.truth) os << ",label";
  os << '\n';
  for (std::size_t i = 0; i < b.n(); ++i) {
    auto r = b.features.row(i);
    for (std::size_t j = 0; j < d; ++j) os << (j ? "," : "") << fmt::format("{:.17g}", r[j]);
    if (b.truth) os << ',' << (*b.truth)[i];
    os << '\n';
  }
  if (!os) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

}  // namespace

DatasetBundle load_dataset(const std::filesystem::path& path, DataFormat format) {
  return format == DataFormat::dcbf ? load_dcbf(path) : load_csv(path);
}

void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& path,
                  DataFormat format) {
  bundle.validate();
  if (format == DataFormat::dcbf) {
    save_dcbf(bundle, path);
  } else {
    save_csv(bundle, path);
  }
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian mixtures

void SynthConfig::validate() const {
  if (c < 2) throw ConfigError("synth.c must be >= 2");
  if (d < 1) throw ConfigError("synth.d must be >= 1");
  if (!(imbalance_ratio >= 1.0)) throw ConfigError("synth.imbalance_ratio must be >= 1");
  if (!(mean_separation > 0.0)) throw ConfigError("synth.mean_separation must be > 0");
  if (!(within_std > 0.0)) throw ConfigError("synth.within_std must be > 0");
  if (!per_class.empty() && per_class.size() != static_cast<std::size_t>(c)) {
    throw ConfigError("synth.per_class must list exactly c sizes");
  }
}

std::vector<std::size_t> synth_class_sizes(const SynthConfig& cfg) {
  cfg.validate();
  const auto c = static_cast<std::size_t>(cfg.c);
  std::vector<std::size_t> sizes;
  if (!cfg.per_class.empty()) {
    sizes = cfg.per_class;
  } else if (cfg.imbalance_ratio == 1.0) {
    sizes.assign(c, cfg.n / c);
    for (std::size_t k = 0; k < cfg.n % c; ++k) ++sizes[k];
  } else {
    // Class k (0 = head) holds tail * ratio^((c-1-k)/(c-1)) samples. The tail
    // and head are pinned so that head/tail == ratio; rounding residue goes to
    // the middle classes.
    const double ratio = cfg.imbalance_ratio;
    std::vector<double> rel(c);
    double total = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      rel[k] = std::pow(ratio, static_cast<double>(c - 1 - k) / static_cast<double>(c - 1));
      total += rel[k];
    }
    const double tail = std::max(1.0, std::round(static_cast<double>(cfg.n) / total));
    sizes.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
      sizes[k] = static_cast<std::size_t>(std::llround(tail * rel[k]));
    }
    sizes[c - 1] = static_cast<std::size_t>(tail);
    sizes[0] = static_cast<std::size_t>(std::llround(tail * ratio));
    if (c > 2) {
      auto sum = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
      std::size_t k = 1;
      while (sum != cfg.n) {
        if (sum < cfg.n) {
          if (sizes[k] < sizes[0]) { ++sizes[k]; ++sum; }
        } else if (sizes[k] > sizes[c - 1]) {
          --sizes[k];
          --sum;
        }
        k = k + 1 < c - 1 ? k + 1 : 1;
        bool movable = false;
        for (std::size_t j = 1; j + 1 < c; ++j) {
          movable |= sum < cfg.n ? sizes[j] < sizes[0] : sizes[j] > sizes[c - 1];
        }
        if (!movable) break;
      }
    }
  }
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] < 2) {
      throw ConfigError(fmt::format("class {} would have {} samples; need at least 2", k, sizes[k]));
    }
  }
  return sizes;
}

namespace {

// Random orthonormal basis of R^d (rows), Gram-Schmidt on Gaussian draws.
Matrix random_rotation(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix q(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (;;) {
      auto r = q.row(i);
      for (double& v : r) v = normal(rng);
      for (std::size_t j = 0; j < i; ++j) {
        const double p = dot(r, q.row(j));
        auto qj = q.row(j);
        for (std::size_t k = 0; k < d; ++k) r[k] -= p * qj[k];
      }
      const double norm = std::sqrt(squared_norm(r));
      if (norm > 1e-8) {
        for (double& v : r) v /= norm;
        break;
      }
    }
  }
  return q;
}

Matrix cluster_means(const SynthConfig& cfg, Rng& rng) {
  const auto c = static_cast<std::size_t>(cfg.c);
  const auto d = static_cast<std::size_t>(cfg.d);
  Matrix means(c, d);
  if (c <= d) {
    // Scaled, rotated basis vectors: every pair sits exactly at mean_separation.
    const Matrix q = random_rotation(d, rng);
    const double scale = cfg.mean_separation / std::sqrt(2.0);
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t j = 0; j < d; ++j) means(k, j) = scale * q(k, j);
    }
    return means;
  }
  // More clusters than dimensions: rejection sampling in a growing ball.
  std::normal_distribution<double> normal(0.0, 1.0);
  double radius = cfg.mean_separation;
  std::size_t placed = 0;
  std::size_t attempts = 0;
  while (placed < c) {
    auto r = means.row(placed);
    for (double& v : r) v = normal(rng) * radius;
    bool ok = true;
    for (std::size_t j = 0; j < placed && ok; ++j) {
      ok = std::sqrt(squared_distance(r, means.row(j))) >= cfg.mean_separation;
    }
    if (ok) {
      ++placed;
    } else if (++attempts % 1000 == 0) {
      radius *= 1.5;
    }
  }
  return means;
}

}  // namespace

DatasetBundle generate_gaussian_mixture(const SynthConfig& cfg) {
  const auto sizes = synth_class_sizes(cfg);
  Rng rng = make_rng(cfg.seed, "synth");
  const Matrix means = cluster_means(cfg, rng);
  const auto d = static_cast<std::size_t>(cfg.d);
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});

  std::vector<int> labels;
  labels.reserve(n);
  for (std::size_t k = 0; k < sizes.size(); ++k) labels.insert(labels.end(), sizes[k], static_cast<int>(k));
  std::shuffle(labels.begin(), labels.end(), rng);

  std::normal_distribution<double> normal(0.0, cfg.within_std);
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto mu = means.row(static_cast<std::size_t>(labels[i]));
    auto r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) r[j] = mu[j] + normal(rng);
  }
  return DatasetBundle(FeatureMatrix(std::move(x)), LabelVector(std::move(labels), cfg.c));
}

}  // namespace dcboost
