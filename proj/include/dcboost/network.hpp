#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dcboost/matrix.hpp"
#include "dcboost/rng.hpp"

namespace dcboost {

struct DenseLayer {
  Matrix weight;              // out x in
  std::vector<double> bias;   // out

  bool operator==(const DenseLayer&) const = default;
};

/// Fully connected network: affine layers with ReLU between them and a
/// row-wise L2 normalization on the output.
class MLPNetwork {
 public:
  MLPNetwork() = default;
  /// He-normal weights, zero biases.
  MLPNetwork(std::vector<std::size_t> dims, Rng& rng);
  static MLPNetwork zeros(std::vector<std::size_t> dims);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const;
  // FNV-1a over the raw parameter bytes, in layer order.
  std::uint64_t parameter_hash() const;

  bool operator==(const MLPNetwork&) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
};

bool same_architecture(const MLPNetwork& a, const MLPNetwork& b);

struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> pre;          // pre-activation of each layer
  std::vector<double> output_norm;  // norm of the raw output row
  Matrix output;                    // L2-normalized rows
};

/// Throws ShapeError on an input width mismatch and DegenerateOutputError
/// when an output row has zero norm.
ForwardCache forward(const MLPNetwork& net, const Matrix& x);
Matrix infer(const MLPNetwork& net, const Matrix& x);

struct NetworkGrads {
  std::vector<DenseLayer> layers;
};

struct BackwardResult {
  NetworkGrads grads;
  Matrix grad_input;
};

/// Gradients of a scalar loss given dL/d(output) for the normalized output.
BackwardResult backward(const MLPNetwork& net, const ForwardCache& cache, const Matrix& grad_output);

/// target <- momentum * target + (1 - momentum) * online, every parameter.
void ema_update(const MLPNetwork& online, MLPNetwork& target, double momentum);

/// theta <- theta - lr * grad. Throws NonFiniteGradientError (leaving the
/// network untouched) if any gradient entry is not finite.
void sgd_step(MLPNetwork& net, const NetworkGrads& grads, double lr);

void write_network(std::ostream& os, const MLPNetwork& net);
MLPNetwork read_network(std::istream& is);

}  // namespace dcboost
