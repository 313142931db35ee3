#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fsml/corpus.hpp"
#include "fsml/embeddings.hpp"
#include "fsml/episodes.hpp"
#include "fsml/labelrep.hpp"
#include "fsml/lexicons.hpp"
#include "fsml/model.hpp"
#include "fsml/scoring.hpp"

namespace fsml {

// ---------------------------------------------------------------------------
// Meta threshold and calibration

/// r * max + (1 - r) * min. Throws ConfigError on empty scores.
double meta_threshold(const Vector& scores, double r);

/// alpha * t_meta + (1 - alpha) * t_est. Throws ConfigError unless 0 <= alpha <= 1.
double calibrated_threshold(double t_meta, double t_est, double alpha);

/// The (n+1)-th largest score, by position in the descending sort. For
/// n >= N every label has to pass, so min - epsilon * (1 + |min|) is returned.
double kth_score_threshold(const Vector& scores, int n, double epsilon = 1e-6);

// ---------------------------------------------------------------------------
// Linguistic features and kernel regression

struct RawFeatures {
  int length = 0;
  int conjunctions = 0;
  int predicates = 0;
  int punctuation = 0;
  int interrogatives = 0;

  /// Counts divided by kFeatureNormalizer.
  Vector normalized() const;

  bool operator==(const RawFeatures&) const = default;
};

RawFeatures extract_features(const Utterance& u, const Lexicons& lexicons);

/// MLP over the normalized raw counts.
Vector project_features(const RawFeatures& raw, const Mlp& mlp);

/// exp(-|a - b|^2 / lambda).
double kernel_weight(const Vector& a, const Vector& b, double lambda);

/// Nadaraya-Watson regression over the support set in projected feature
/// space. Support features are computed once at construction.
class KernelRegressor {
 public:
  KernelRegressor(const SupportSet& support, const ThresholdParams& params,
                  const Lexicons& lexicons);

  /// Normalized kernel weights of the support items for `query`.
  std::vector<double> weights(const Utterance& query) const;
  double label_count(const Utterance& query) const;
  /// Weighted mean of kth_score_threshold(scores, |y'|) over the support.
  double threshold(const Utterance& query, const Vector& scores) const;

  const std::vector<int>& support_label_counts() const noexcept { return counts_; }

 private:
  const ThresholdParams* params_;
  const Lexicons* lexicons_;
  std::vector<Vector> support_features_;
  std::vector<int> counts_;
};

double estimate_label_count(const Utterance& query, const SupportSet& support,
                            const ThresholdParams& params, const Lexicons& lexicons);

double estimate_threshold(const Utterance& query, const SupportSet& support, const Vector& scores,
                          const ThresholdParams& params, const Lexicons& lexicons);

// ---------------------------------------------------------------------------
// Prediction

enum class ScorerKind { kPrototype, kMatching };

struct ThresholdMode {
  enum class Kind { kMetaOnly, kCalibrated, kFixed };
  Kind kind = Kind::kCalibrated;
  double fixed_t = 0.0;

  static ThresholdMode meta_only() { return {Kind::kMetaOnly, 0.0}; }
  static ThresholdMode calibrated() { return {Kind::kCalibrated, 0.0}; }
  static ThresholdMode fixed(double t) { return {Kind::kFixed, t}; }

  /// "meta_only", "calibrated" or "fixed".
  std::string name() const;
  /// Parses the names above; "fixed" takes its value from `fixed_t`.
  static ThresholdMode parse(std::string_view name, double fixed_t = 0.0);
};

struct Prediction {
  RelevanceScores scores;
  double t_meta = 0.0;
  double t_est = 0.0;
  double t = 0.0;
  double n_est = 0.0;
  std::vector<int> labels;  // ascending label indices
};

/// Labels whose score is strictly greater than t.
std::vector<int> select_labels(const Vector& scores, double t);

struct PredictContext {
  const LabelSpace& labels;
  const EmbeddingTable& table;
  const Lexicons& lexicons;
};

/// Per-episode predictor: label representations and support features are
/// computed once and reused for every query.
class EpisodePredictor {
 public:
  EpisodePredictor(const SupportSet& support, const ModelParams& model, const PredictContext& ctx,
                   ScorerKind scorer = ScorerKind::kPrototype);

  RelevanceScores scores(const Utterance& query) const;
  Prediction predict(const Utterance& query, const ThresholdMode& mode) const;
  /// Thresholding stage alone, for callers that already hold the scores.
  Prediction decide(const Utterance& query, RelevanceScores scores, const ThresholdMode& mode) const;

  const LabelReps& reps() const noexcept { return reps_; }

 private:
  const SupportSet* support_;
  const ModelParams* model_;
  PredictContext ctx_;
  ScorerKind scorer_;
  LabelReps reps_;
  KernelRegressor regressor_;
};

/// Scores, threshold and selected labels for one query. When the score range
/// is below 1e-9 in meta_only or calibrated mode, t drops just under t_meta so
/// every label is selected.
Prediction predict(const Utterance& query, const SupportSet& support, const ModelParams& model,
                   const ThresholdMode& mode, const PredictContext& ctx,
                   ScorerKind scorer = ScorerKind::kPrototype);

}  // namespace fsml
