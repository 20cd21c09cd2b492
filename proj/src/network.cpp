#include "dcboost/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "dcboost/error.hpp"
#include "dcboost/kernels.hpp"

namespace dcboost {

MLPNetwork::MLPNetwork(std::vector<std::size_t> dims, Rng& rng) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw ArchitectureError("a network needs at least one layer");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const std::size_t in = dims_[l], out = dims_[l + 1];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    for (double& w : layer.weight.values()) w = normal(rng);
    layers_.push_back(std::move(layer));
  }
}

MLPNetwork MLPNetwork::zeros(std::vector<std::size_t> dims) {
  if (dims.size() < 2) throw ArchitectureError("a network needs at least one layer");
  MLPNetwork net;
  net.dims_ = std::move(dims);
  for (std::size_t l = 0; l + 1 < net.dims_.size(); ++l) {
    net.layers_.push_back({Matrix(net.dims_[l + 1], net.dims_[l]),
                           std::vector<double>(net.dims_[l + 1], 0.0)});
  }
  return net;
}

std::size_t MLPNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

std::uint64_t MLPNetwork::parameter_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& l : layers_) {
    for (double v : l.weight.values()) feed(v);
    for (double v : l.bias) feed(v);
  }
  return h;
}

bool same_architecture(const MLPNetwork& a, const MLPNetwork& b) { return a.dims() == b.dims(); }

ForwardCache forward(const MLPNetwork& net, const Matrix& x) {
  if (x.cols() != net.input_dim()) {
    throw ShapeError(fmt::format("network expects width {}, got {}", net.input_dim(), x.cols()));
  }
  ForwardCache cache;
  const auto& layers = net.layers();
  Matrix h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = kernels::affine(h, layers[l].weight, layers[l].bias);
    cache.inputs.push_back(std::move(h));
    if (l + 1 < layers.size()) {
      h = z;
      for (double& v : h.values()) v = v > 0.0 ? v : 0.0;
    } else {
      h = z;
    }
    cache.pre.push_back(std::move(z));
  }
  cache.output_norm.resize(h.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    auto r = h.row(i);
    const double norm = std::sqrt(squared_norm(r));
    if (!(norm >= 1e-12)) {
      throw DegenerateOutputError(fmt::format("network output row {} has zero norm", i));
    }
    cache.output_norm[i] = norm;
    for (double& v : r) v /= norm;
  }
  cache.output = std::move(h);
  return cache;
}

Matrix infer(const MLPNetwork& net, const Matrix& x) { return forward(net, x).output; }

BackwardResult backward(const MLPNetwork& net, const ForwardCache& cache, const Matrix& grad_output) {
  const auto& layers = net.layers();
  const Matrix& y = cache.output;
  if (grad_output.rows() != y.rows() || grad_output.cols() != y.cols()) {
    throw ShapeError("backward: gradient shape does not match the output");
  }
  // Through y = u / |u|: du = (g - (y.g) y) / |u|
  Matrix g(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto yi = y.row(i);
    auto gi = grad_output.row(i);
    const double radial = dot(yi, gi);
    auto out = g.row(i);
    for (std::size_t k = 0; k < y.cols(); ++k) {
      out[k] = (gi[k] - radial * yi[k]) / cache.output_norm[i];
    }
  }

  BackwardResult result;
  result.grads.layers.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& in = cache.inputs[l];
    const Matrix& w = layers[l].weight;
    const std::size_t n = in.rows(), n_in = w.cols(), n_out = w.rows();
    if (l + 1 < layers.size()) {
      const Matrix& pre = cache.pre[l];
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(pre.values()[k] > 0.0)) g.values()[k] = 0.0;
      }
    }
    DenseLayer& gl = result.grads.layers[l];
    gl.weight = Matrix(n_out, n_in);
    gl.bias.assign(n_out, 0.0);
    Matrix g_in(n, n_in);
    for (std::size_t i = 0; i < n; ++i) {
      auto gi = g.row(i);
      auto xi = in.row(i);
      auto gin = g_in.row(i);
      for (std::size_t o = 0; o < n_out; ++o) {
        const double go = gi[o];
        if (go == 0.0) continue;
        gl.bias[o] += go;
        auto gw = gl.weight.row(o);
        auto wo = w.row(o);
        for (std::size_t k = 0; k < n_in; ++k) {
          gw[k] += go * xi[k];
          gin[k] += go * wo[k];
        }
      }
    }
    g = std::move(g_in);
  }
  result.grad_input = std::move(g);
  return result;
}

void ema_update(const MLPNetwork& online, MLPNetwork& target, double momentum) {
  if (!same_architecture(online, target)) throw ArchitectureError("EMA across different architectures");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ValueError("EMA momentum must lie in [0, 1]");
  const double rest = 1.0 - momentum;
  for (std::size_t l = 0; l < online.layers().size(); ++l) {
    const auto& src = online.layers()[l];
    auto& dst = target.layers()[l];
    for (std::size_t k = 0; k < src.weight.size(); ++k) {
      dst.weight.values()[k] = momentum * dst.weight.values()[k] + rest * src.weight.values()[k];
    }
    for (std::size_t k = 0; k < src.bias.size(); ++k) {
      dst.bias[k] = momentum * dst.bias[k] + rest * src.bias[k];
    }
  }
}

void sgd_step(MLPNetwork& net, const NetworkGrads& grads, double lr) {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size()) throw ArchitectureError("gradient/network layer mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& gl = grads.layers[l];
    if (gl.weight.size() != layers[l].weight.size() || gl.bias.size() != layers[l].bias.size()) {
      throw ArchitectureError("gradient/network shape mismatch");
    }
    for (double v : gl.weight.values()) {
      if (!std::isfinite(v)) throw NonFiniteGradientError(fmt::format("non-finite weight gradient in layer {}", l));
    }
    for (double v : gl.bias) {
      if (!std::isfinite(v)) throw NonFiniteGradientError(fmt::format("non-finite bias gradient in layer {}", l));
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& gl = grads.layers[l];
    for (std::size_t k = 0; k < gl.weight.size(); ++k) layers[l].weight.values()[k] -= lr * gl.weight.values()[k];
    for (std::size_t k = 0; k < gl.bias.size(); ++k) layers[l].bias[k] -= lr * gl.bias[k];
  }
}

// Little-endian serialization used inside DCBM checkpoints:
// u32 dim count, u32 dims..., then per layer weights (row-major) and biases.
namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("truncated checkpoint");
  return v;
}

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

void write_network(std::ostream& os, const MLPNetwork& net) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(net.dims().size()));
  for (auto d : net.dims()) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  for (const auto& l : net.layers()) {
    for (double v : l.weight.values()) put<double>(os, v);
    for (double v : l.bias) put<double>(os, v);
  }
}

MLPNetwork read_network(std::istream& is) {
  const auto count = get<std::uint32_t>(is);
  if (count < 2 || count > 64) throw FormatError("implausible layer count in checkpoint");
  std::vector<std::size_t> dims(count);
  for (auto& d : dims) {
    d = get<std::uint32_t>(is);
    if (d == 0) throw FormatError("zero width layer in checkpoint");
  }
  MLPNetwork net = MLPNetwork::zeros(dims);
  for (auto& l : net.layers()) {
    for (double& v : l.weight.values()) v = get<double>(is);
    for (double& v : l.bias) v = get<double>(is);
  }
  return net;
}

}  // namespace dcboost
