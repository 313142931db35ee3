#pragma once

#include <optional>

#include "fsml/linalg.hpp"
#include "fsml/mlp.hpp"

namespace fsml {

/// Number of linguistic count features.
inline constexpr int kRawFeatureCount = 5;
/// Raw counts are divided by this before the MLP.
inline constexpr double kFeatureNormalizer = 10.0;

struct ThresholdParams {
  double r = 0.5;          // meta-threshold interpolation rate
  double alpha = 0.3;      // weight of the meta threshold in calibration
  double rho = 0.0;        // kernel bandwidth is exp(rho)
  double epsilon = 1e-6;   // relative perturbation for all-label escapes
  Mlp mlp;

  double lambda() const noexcept;
  /// Throws ConfigError if r, alpha or epsilon are out of range.
  void validate() const;

  bool operator==(const ThresholdParams&) const = default;
};

/// Everything learned or configured for one model.
struct ModelParams {
  int embed_dim = 0;
  Matrix proj;  // dim_out x embed_dim
  double beta = 0.5;
  ThresholdParams threshold;
  /// Dev-tuned fixed threshold used by the fixed-threshold baselines.
  std::optional<double> fixed_threshold;

  /// Identity projection, fresh MLP drawn from `rng`.
  static ModelParams initial(int embed_dim, double beta, int mlp_layers, int mlp_hidden, Rng& rng);

  /// Rounds every array parameter to f32 so the in-memory model equals what
  /// the model file stores.
  void round_to_f32();

  bool operator==(const ModelParams&) const = default;
};

}  // namespace fsml
