#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsml/corpus.hpp"
#include "fsml/embeddings.hpp"
#include "fsml/episodes.hpp"
#include "fsml/lexicons.hpp"
#include "fsml/thresholding.hpp"
#include "fsml/training.hpp"

namespace fsml {

struct Confusion {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

/// Pooled over every (query, label) pair. Throws ConfigError on a length mismatch.
Confusion confusion_counts(std::span<const std::vector<int>> predictions,
                           std::span<const std::vector<int>> golds);

/// 2TP / (2TP + FP + FN), 1.0 when all three counts are zero.
double micro_f1(std::span<const std::vector<int>> predictions,
                std::span<const std::vector<int>> golds);

/// Fraction of queries whose predicted set size equals the gold size.
double label_count_accuracy(std::span<const std::vector<int>> predictions,
                            std::span<const std::vector<int>> golds);

struct EvalReport {
  std::string domain;
  std::string model;  // "MPN", "MMN", "MPN+ALR", "Ours", ...
  std::string mode;   // threshold mode name
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<double> episode_f1;
  std::vector<int> episode_count_correct;
  std::vector<int> episode_queries;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  double label_count_accuracy = 0.0;

  nlohmann::json to_json() const;
  /// episode_id, f1, n_correct_count rows with a header line.
  std::string to_tsv() const;
};

EvalReport evaluate_split(std::span<const Episode> episodes, const ModelParams& model,
                          const ThresholdMode& mode, const PredictContext& ctx,
                          ScorerKind scorer = ScorerKind::kPrototype);

/// Picks the fixed threshold with the best mean episode F1 on `dev` among the
/// 0, 0.05, ..., 1 quantiles of all dev scores; ties go to the lower quantile.
double tune_fixed_threshold(std::span<const Episode> dev, const ModelParams& model,
                            const PredictContext& ctx, ScorerKind scorer = ScorerKind::kPrototype);

struct CrossValidationConfig {
  TrainConfig train;
  int k = 1;
  int source_episodes = 100;
  int target_episodes = 50;
  int query_size = 16;
  std::vector<std::uint64_t> seeds{1};
  /// Also train and report the MPN and MMN baselines.
  bool ablation = false;
  SupportOptions support;
};

struct RotationResult {
  std::string target;
  std::string dev;
  std::vector<std::string> sources;
  std::uint64_t seed = 0;
  double beta = 0.0;
  double r = 0.0;
  std::vector<EvalReport> reports;
  nlohmann::json train_report;
};

struct CrossValidationReport {
  int k = 0;
  std::vector<RotationResult> rotations;

  /// Mean over rotations and seeds of the report matching (model, mode).
  double mean_f1(const std::string& model, const std::string& mode) const;
  double mean_label_count_accuracy(const std::string& model, const std::string& mode) const;
  /// Per-seed means for (model, mode), in seed order.
  std::vector<double> seed_means(const std::string& model, const std::string& mode) const;

  nlohmann::json to_json() const;
};

/// Leave-one-domain-out: for rotation i the target is domain i, dev is domain
/// i + 1 (mod n), and the rest are sources. Every seed rebuilds the episodes
/// and retrains. Throws ConfigError with fewer than 3 domains.
CrossValidationReport cross_validate(std::span<const Domain> domains, const EmbeddingTable& table,
                                     const Lexicons& lexicons, const CrossValidationConfig& cfg);

}  // namespace fsml
