#include "fsml/mlp.hpp"

#include <cmath>

#include "fsml/errors.hpp"

namespace fsml {

Mlp::Mlp(std::vector<MlpLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weights.rows()) throw ConfigError("MLP layer bias does not match its weights");
    if (i > 0 && l.weights.cols() != layers_[i - 1].weights.rows()) {
      throw ConfigError("MLP layer " + std::to_string(i) + " input does not match the previous output");
    }
  }
}

Mlp Mlp::random(int input, int hidden, int n_layers, Rng& rng) {
  if (input < 1 || hidden < 1 || n_layers < 1) throw ConfigError("MLP shape must be positive");
  std::vector<MlpLayer> layers;
  int fan_in = input;
  for (int l = 0; l < n_layers; ++l) {
    const double s = std::sqrt(6.0 / fan_in);
    MlpLayer layer{Matrix(hidden, fan_in), Vector::Constant(hidden, 0.1)};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = (2.0 * rng.uniform() - 1.0) * s;
      }
    }
    layers.push_back(std::move(layer));
    fan_in = hidden;
  }
  return Mlp(std::move(layers));
}

int Mlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weights.cols());
}

int Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weights.rows());
}

Vector Mlp::forward(const Vector& x) const {
  Trace trace;
  return forward(x, trace);
}

Vector Mlp::forward(const Vector& x, Trace& trace) const {
  if (layers_.empty()) {
    trace.activations = {x};
    return x;
  }
  if (x.size() != input_dim()) {
    throw ConfigError("MLP input has size " + std::to_string(x.size()) + ", expected " +
                      std::to_string(input_dim()));
  }
  trace.activations.clear();
  trace.activations.reserve(layers_.size() + 1);
  trace.activations.push_back(x);
  for (const auto& layer : layers_) {
    Vector z = layer.weights * trace.activations.back() + layer.bias;
    trace.activations.push_back(z.cwiseMax(0.0));
  }
  return trace.activations.back();
}

void Mlp::backward(const Trace& trace, const Vector& grad_output, std::vector<MlpLayer>& grads) const {
  Vector upstream = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Vector& out = trace.activations[i + 1];
    // ReLU derivative taken as 0 at the kink.
    const Vector dz = (out.array() > 0.0).select(upstream, 0.0);
    grads[i].weights.noalias() += dz * trace.activations[i].transpose();
    grads[i].bias += dz;
    if (i > 0) upstream = layers_[i].weights.transpose() * dz;
  }
}

std::vector<MlpLayer> Mlp::zero_like() const {
  std::vector<MlpLayer> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) {
    out.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

}  // namespace fsml
