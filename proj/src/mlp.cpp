#include <cmath>
#include <random>

#include "cadrepair/errors.h"
#include "cadrepair/neural.h"
#include "cadrepair/rng.h"

namespace cadrepair {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_dims(std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw Error(Errc::DimensionMismatch, "an MLP needs at least input and output widths");
  for (std::size_t d : dims) {
    if (d == 0) throw Error(Errc::DimensionMismatch, "layer width must be positive");
  }
}

void affine(const DenseLayer& layer, std::span<const double> x, std::vector<double>& y) {
  y.resize(layer.out);
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* w = layer.weight.data() + o * layer.in;
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
}

void require_input(const Mlp& m, std::span<const double> x) {
  if (m.layers.empty()) throw Error(Errc::DimensionMismatch, "empty network");
  if (x.size() != m.input_dim()) {
    throw Error(Errc::DimensionMismatch,
                "input width " + std::to_string(x.size()) + " != " + std::to_string(m.input_dim()));
  }
}

// Back-propagates delta (gradient w.r.t. layer l's pre-activation) to the
// gradient w.r.t. layer l's input.
std::vector<double> backprop_input(const DenseLayer& layer, std::span<const double> delta) {
  std::vector<double> g(layer.in, 0.0);
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double d = delta[o];
    if (d == 0.0) continue;
    const double* w = layer.weight.data() + o * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) g[i] += w[i] * d;
  }
  return g;
}

}  // namespace

Mlp Mlp::zeros(std::span<const std::size_t> dims, OutputActivation output) {
  check_dims(dims);
  Mlp m;
  m.output = output;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.weight.assign(layer.in * layer.out, 0.0);
    layer.bias.assign(layer.out, 0.0);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

Mlp Mlp::create(std::span<const std::size_t> dims, OutputActivation output, std::uint64_t seed) {
  Mlp m = zeros(dims, output);
  Rng rng(seed);
  for (DenseLayer& layer : m.layers) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(layer.in)));
    for (double& w : layer.weight) w = dist(rng);
  }
  return m;
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().in);
  for (const DenseLayer& l : layers) d.push_back(l.out);
  return d;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

bool Mlp::all_finite() const {
  for (const DenseLayer& l : layers) {
    for (double v : l.weight) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : l.bias) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

ForwardResult mlp_forward(const Mlp& m, std::span<const double> x) {
  require_input(m, x);
  ForwardResult r;
  r.cache.inputs.reserve(m.layers.size());
  r.cache.pre.reserve(m.layers.size());
  std::vector<double> current(x.begin(), x.end());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    std::vector<double> pre;
    affine(m.layers[l], current, pre);
    r.cache.inputs.push_back(std::move(current));
    current = pre;
    const bool last = l + 1 == m.layers.size();
    if (!last) {
      for (double& v : current) v = v > 0.0 ? v : 0.0;
    } else if (m.output == OutputActivation::Sigmoid) {
      for (double& v : current) v = sigmoid(v);
    }
    r.cache.pre.push_back(std::move(pre));
  }
  r.output = std::move(current);
  return r;
}

std::vector<double> mlp_predict(const Mlp& m, std::span<const double> x) {
  require_input(m, x);
  std::vector<double> current(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    affine(m.layers[l], current, next);
    const bool last = l + 1 == m.layers.size();
    if (!last) {
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    } else if (m.output == OutputActivation::Sigmoid) {
      for (double& v : next) v = sigmoid(v);
    }
    current.swap(next);
  }
  return current;
}

std::vector<double> mlp_grad_input(const Mlp& m, std::span<const double> x) {
  require_input(m, x);
  if (m.output_dim() != 1) {
    throw Error(Errc::NonScalarOutput, "input gradient needs a scalar output, width is " +
                                           std::to_string(m.output_dim()));
  }
  const ForwardResult fwd = mlp_forward(m, x);
  std::vector<double> delta(1);
  delta[0] = m.output == OutputActivation::Sigmoid ? fwd.output[0] * (1.0 - fwd.output[0]) : 1.0;
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    std::vector<double> g = backprop_input(m.layers[l], delta);
    if (l == 0) return g;
    const std::vector<double>& pre = fwd.cache.pre[l - 1];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(pre[i] > 0.0)) g[i] = 0.0;
    }
    delta = std::move(g);
  }
  return {};
}

MlpGradients::MlpGradients(const Mlp& m) {
  for (const DenseLayer& l : m.layers) {
    weight.emplace_back(l.weight.size(), 0.0);
    bias.emplace_back(l.bias.size(), 0.0);
  }
}

void MlpGradients::clear() {
  for (auto& w : weight) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

void mlp_backward(const Mlp& m, const ForwardCache& cache, std::span<const double> grad_output_pre,
                  MlpGradients& grads) {
  if (grad_output_pre.size() != m.output_dim()) {
    throw Error(Errc::DimensionMismatch, "output gradient width mismatch");
  }
  std::vector<double> delta(grad_output_pre.begin(), grad_output_pre.end());
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    const DenseLayer& layer = m.layers[l];
    const std::vector<double>& input = cache.inputs[l];
    double* gw = grads.weight[l].data();
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      grads.bias[l][o] += d;
      if (d == 0.0) continue;
      double* row = gw + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) row[i] += d * input[i];
    }
    if (l == 0) break;
    std::vector<double> g = backprop_input(layer, delta);
    const std::vector<double>& pre = cache.pre[l - 1];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(pre[i] > 0.0)) g[i] = 0.0;
    }
    delta = std::move(g);
  }
}

void TrainConfig::validate() const {
  if (!(split > 0.0 && split < 1.0)) throw Error(Errc::BadRange, "split fraction must lie in (0, 1)");
  if (!(learning_rate > 0.0)) throw Error(Errc::BadRange, "learning rate must be positive");
  if (epochs < 0) throw Error(Errc::BadRange, "epochs must be non-negative");
  if (batch_size == 0) throw Error(Errc::BadRange, "batch size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(Errc::BadRange, "momentum must lie in [0, 1)");
  if (!(input_noise >= 0.0)) throw Error(Errc::BadRange, "input noise must be non-negative");
}

SgdMomentum::SgdMomentum(const Mlp& m) : velocity_(m) {}

void SgdMomentum::step(Mlp& m, const MlpGradients& grads, double learning_rate, double momentum, double scale) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    DenseLayer& layer = m.layers[l];
    auto& vw = velocity_.weight[l];
    auto& vb = velocity_.bias[l];
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      vw[i] = momentum * vw[i] - learning_rate * scale * grads.weight[l][i];
      layer.weight[i] += vw[i];
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      vb[i] = momentum * vb[i] - learning_rate * scale * grads.bias[l][i];
      layer.bias[i] += vb[i];
    }
  }
}

}  // namespace cadrepair
