#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dcboost/matrix.hpp"

namespace dcboost {

/// Dense n x d embedding matrix. Immutable after construction; every entry is
/// finite and, when normalized() is true, every row has unit Euclidean norm.
class FeatureMatrix {
 public:
  static constexpr double kUnitTolerance = 1e-6;

  FeatureMatrix(Matrix values, bool normalized = false);
  FeatureMatrix(std::size_t n, std::size_t d, std::vector<double> data, bool normalized = false);

  std::size_t n() const { return values_.rows(); }
  std::size_t d() const { return values_.cols(); }
  bool normalized() const { return normalized_; }
  const Matrix& values() const { return values_; }
  std::span<const double> row(std::size_t i) const { return values_.row(i); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }

  FeatureMatrix gather_rows(std::span<const std::size_t> positions) const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  Matrix values_;
  bool normalized_ = false;
};

/// Integer class id per sample, each in [0, num_classes).
struct LabelVector {
  std::vector<int> labels;
  int num_classes = 0;

  LabelVector() = default;
  LabelVector(std::vector<int> labels, int num_classes);
  // num_classes inferred as max label + 1.
  static LabelVector from_labels(std::vector<int> labels);

  std::size_t size() const { return labels.size(); }
  int operator[](std::size_t i) const { return labels[i]; }
  LabelVector gather(std::span<const std::size_t> positions) const;
  std::vector<std::size_t> class_counts() const;

  bool operator==(const LabelVector&) const = default;
};

struct DatasetBundle {
  FeatureMatrix features;
  std::optional<LabelVector> truth;
  std::optional<LabelVector> pseudo;
  std::vector<std::uint64_t> ids;

  explicit DatasetBundle(FeatureMatrix f, std::optional<LabelVector> truth = std::nullopt,
                         std::optional<LabelVector> pseudo = std::nullopt);

  std::size_t n() const { return features.n(); }
  // Throws ShapeError when members disagree on n.
  void validate() const;

  bool operator==(const DatasetBundle&) const = default;
};

enum class DataFormat { dcbf, csv };

DataFormat parse_data_format(std::string_view name);
// Guess from the file extension; ".csv" is CSV, anything else DCBF.
DataFormat format_from_path(const std::filesystem::path& path);

/// Returns a copy with every row scaled to unit norm. Throws ZeroVectorError
/// for rows with norm below 1e-12.
FeatureMatrix l2_normalize(const FeatureMatrix& m);
Matrix l2_normalize_rows(const Matrix& m);

DatasetBundle load_dataset(const std::filesystem::path& path, DataFormat format);
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& path,
                  DataFormat format);

struct SynthConfig {
  int c = 10;
  int d = 16;
  std::size_t n = 2000;
  // Explicit class sizes; overrides n and imbalance_ratio when non-empty.
  std::vector<std::size_t> per_class;
  double imbalance_ratio = 1.0;
  double mean_separation = 4.0;
  double within_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Class sizes implied by the config: equal split, explicit, or a geometric
/// head-to-tail decay with max/min equal to imbalance_ratio.
std::vector<std::size_t> synth_class_sizes(const SynthConfig& cfg);

DatasetBundle generate_gaussian_mixture(const SynthConfig& cfg);

}  // namespace dcboost
