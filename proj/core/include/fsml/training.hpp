#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsml/corpus.hpp"
#include "fsml/embeddings.hpp"
#include "fsml/episodes.hpp"
#include "fsml/lexicons.hpp"
#include "fsml/model.hpp"
#include "fsml/scoring.hpp"

namespace fsml {

struct TrainConfig {
  int epochs = 10;
  int kernel_epochs = 30;
  int batch_size = 4;
  double lr_proj = 1e-2;
  double lr_kernel = 1e-2;
  double r_grid_step = 0.01;
  std::uint64_t seed = 1;
  double beta = 0.5;
  bool beta_sweep = false;
  int mlp_layers = 1;
  int mlp_hidden = 10;
  double alpha = 0.3;
  double epsilon = 1e-6;

  /// Throws ConfigError on non-positive rates, epochs < 1, bad MLP shape, etc.
  void validate() const;
};

/// Training episodes of one source domain.
struct DomainEpisodes {
  const Domain* domain = nullptr;
  std::vector<Episode> episodes;
};

/// (1/N) * sum_i [ sigma(f_i) if y_i not gold, -sigma(f_i) if gold ].
double sigmoid_ce_loss(const Vector& scores, std::span<const int> gold);

// ---------------------------------------------------------------------------
// Scorer: only the projection W is trained. A score is <W q, W u_i> with
// u_i = beta * E(y_i) + (1 - beta) * mean of support embeddings.

struct ScorerExample {
  Vector query;           // unprojected sentence embedding
  std::vector<int> gold;  // ascending label indices
};

struct ScorerEpisode {
  std::vector<Vector> reps;  // unprojected u_i per label
  std::vector<ScorerExample> queries;
};

ScorerEpisode prepare_scorer_episode(const Episode& episode, const LabelSpace& labels,
                                     const EmbeddingTable& table, double beta);

/// Mean sigmoid_ce_loss over `batch`; when `grad` is non-null it receives
/// dLoss/dW (resized to W's shape).
double scorer_loss(const Matrix& W, std::span<const Vector> reps,
                   std::span<const ScorerExample> batch, Matrix* grad = nullptr);

struct ScorerTrainResult {
  ModelParams model;
  std::vector<double> epoch_loss;
};

/// SGD on the scorer loss in batches of cfg.batch_size queries. Episodes are
/// visited round-robin across source domains; each domain's episode order is
/// reshuffled every epoch. Throws NumericError on a non-finite loss.
ScorerTrainResult train_scorer(std::span<const DomainEpisodes> sources, ModelParams model,
                               const TrainConfig& cfg, const EmbeddingTable& table);

// ---------------------------------------------------------------------------
// Kernel regression pretraining: squared error between the estimated and
// gold label counts, trained over rho and the MLP weights.

struct KernelExample {
  Vector features;  // normalized raw features
  int gold_count = 0;
};

struct KernelEpisode {
  std::vector<Vector> support_features;
  std::vector<int> support_counts;
  std::vector<KernelExample> queries;
};

KernelEpisode prepare_kernel_episode(const Episode& episode, const Lexicons& lexicons);

struct KernelGradient {
  double rho = 0.0;
  std::vector<MlpLayer> mlp;
};

/// Mean squared label-count error over `batch`; fills `grad` when non-null.
double kernel_loss(const ThresholdParams& params, const KernelEpisode& episode,
                   std::span<const KernelExample> batch, KernelGradient* grad = nullptr);

/// Label count estimate for one query from prepared features.
double kernel_label_count(const ThresholdParams& params, const KernelEpisode& episode,
                          const Vector& query_features);

struct KernelTrainResult {
  ThresholdParams params;
  std::vector<double> epoch_loss;
};

KernelTrainResult pretrain_kernel(std::span<const DomainEpisodes> sources, ThresholdParams params,
                                  const TrainConfig& cfg, const Lexicons& lexicons);

// ---------------------------------------------------------------------------
// Interpolation rate

struct ScoredQuery {
  Vector scores;
  std::vector<int> gold;
};

struct FitRResult {
  double r = 0.0;
  double f1 = 0.0;
  int evaluations = 0;
};

/// Grid search over r in {0, step, ..., 1} maximizing the mean per-episode
/// micro-F1 of meta-threshold predictions; ties go to the smaller r.
FitRResult fit_r_on_scores(std::span<const std::vector<ScoredQuery>> episodes, double step,
                           double epsilon = 1e-6);

FitRResult fit_r(std::span<const DomainEpisodes> sources, const ModelParams& model,
                 const TrainConfig& cfg, const EmbeddingTable& table);

// ---------------------------------------------------------------------------

struct TrainResult {
  ModelParams model;
  nlohmann::json report;
};

/// Kernel pretraining, then scorer training, then the r grid search. The
/// returned parameters are rounded to f32 before r is fitted.
TrainResult train_pipeline(std::span<const DomainEpisodes> sources, const EmbeddingTable& table,
                           const Lexicons& lexicons, const TrainConfig& cfg);

}  // namespace fsml
