#pragma once

#include <vector>

#include "fsml/linalg.hpp"
#include "fsml/rng.hpp"

namespace fsml {

struct MlpLayer {
  Matrix weights;  // out x in
  Vector bias;     // out

  bool operator==(const MlpLayer&) const = default;
};

/// Stack of affine + ReLU layers.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<MlpLayer> layers);

  /// `n_layers` layers from `input` to `hidden` features, uniform(-s, s)
  /// weights with s = sqrt(6 / fan_in) and a small positive bias.
  static Mlp random(int input, int hidden, int n_layers, Rng& rng);

  int input_dim() const;
  int output_dim() const;
  const std::vector<MlpLayer>& layers() const noexcept { return layers_; }
  std::vector<MlpLayer>& layers() noexcept { return layers_; }

  /// Throws ConfigError when x has the wrong size.
  Vector forward(const Vector& x) const;

  /// Activations of every layer, activations[0] = x.
  struct Trace {
    std::vector<Vector> activations;
  };
  Vector forward(const Vector& x, Trace& trace) const;

  /// Accumulates dL/dW and dL/db into `grads` (same shapes as layers())
  /// given dL/d(output) for the forward pass recorded in `trace`.
  void backward(const Trace& trace, const Vector& grad_output,
                std::vector<MlpLayer>& grads) const;

  std::vector<MlpLayer> zero_like() const;
  std::size_t parameter_count() const;

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<MlpLayer> layers_;
};

}  // namespace fsml
