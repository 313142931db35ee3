#include "fsml/thresholding.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "fsml/errors.hpp"

namespace fsml {

double ThresholdParams::lambda() const noexcept { return std::exp(rho); }

void ThresholdParams::validate() const {
  if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("r must be in [0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!std::isfinite(rho)) throw ConfigError("rho must be finite");
  if (mlp.input_dim() != kRawFeatureCount) throw ConfigError("kernel MLP must take 5 input features");
}

double meta_threshold(const Vector& scores, double r) {
  if (scores.size() == 0) throw ConfigError("meta threshold of empty scores");
  return r * scores.maxCoeff() + (1.0 - r) * scores.minCoeff();
}

double calibrated_threshold(double t_meta, double t_est, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
  return alpha * t_meta + (1.0 - alpha) * t_est;
}

double kth_score_threshold(const Vector& scores, int n, double epsilon) {
  if (scores.size() == 0) throw ConfigError("kth score threshold of empty scores");
  if (n < 0) throw ConfigError("label count must be non-negative");
  if (n >= scores.size()) {
    const double lo = scores.minCoeff();
    return lo - epsilon * (1.0 + std::abs(lo));
  }
  std::vector<double> sorted(scores.data(), scores.data() + scores.size());
  std::nth_element(sorted.begin(), sorted.begin() + n, sorted.end(), std::greater<>());
  return sorted[n];
}

Vector RawFeatures::normalized() const {
  Vector v(kRawFeatureCount);
  v << length, conjunctions, predicates, punctuation, interrogatives;
  return v / kFeatureNormalizer;
}

RawFeatures extract_features(const Utterance& u, const Lexicons& lexicons) {
  RawFeatures f;
  f.length = static_cast<int>(u.tokens.size());
  for (const auto& tok : u.tokens) {
    if (lexicons.conjunctions.contains(tok)) ++f.conjunctions;
    if (lexicons.verbs.contains(tok)) ++f.predicates;
    if (is_punctuation_token(tok)) ++f.punctuation;
    if (lexicons.interrogatives.contains(tok)) ++f.interrogatives;
  }
  return f;
}

Vector project_features(const RawFeatures& raw, const Mlp& mlp) { return mlp.forward(raw.normalized()); }

double kernel_weight(const Vector& a, const Vector& b, double lambda) {
  return std::exp(-(a - b).squaredNorm() / lambda);
}

KernelRegressor::KernelRegressor(const SupportSet& support, const ThresholdParams& params,
                                 const Lexicons& lexicons)
    : params_(&params), lexicons_(&lexicons) {
  if (support.items.empty()) throw DataError("kernel regression needs a non-empty support set");
  support_features_.reserve(support.items.size());
  counts_.reserve(support.items.size());
  for (const auto& item : support.items) {
    support_features_.push_back(project_features(extract_features(item.utterance, lexicons), params.mlp));
    counts_.push_back(static_cast<int>(item.labels.size()));
  }
}

std::vector<double> KernelRegressor::weights(const Utterance& query) const {
  const Vector q = project_features(extract_features(query, *lexicons_), params_->mlp);
  const double lambda = params_->lambda();
  std::vector<double> dist(support_features_.size());
  for (std::size_t j = 0; j < dist.size(); ++j) dist[j] = (q - support_features_[j]).squaredNorm();
  // Distances are shifted by the nearest one; the shift cancels in Z.
  const double nearest = *std::min_element(dist.begin(), dist.end());
  std::vector<double> w(dist.size());
  double z = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = std::exp(-(dist[j] - nearest) / lambda);
    z += w[j];
  }
  for (auto& x : w) x /= z;
  return w;
}

double KernelRegressor::label_count(const Utterance& query) const {
  const auto w = weights(query);
  double n = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) n += w[j] * counts_[j];
  return n;
}

double KernelRegressor::threshold(const Utterance& query, const Vector& scores) const {
  const auto w = weights(query);
  double t = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    t += w[j] * kth_score_threshold(scores, counts_[j], params_->epsilon);
  }
  return t;
}

double estimate_label_count(const Utterance& query, const SupportSet& support,
                            const ThresholdParams& params, const Lexicons& lexicons) {
  return KernelRegressor(support, params, lexicons).label_count(query);
}

double estimate_threshold(const Utterance& query, const SupportSet& support, const Vector& scores,
                          const ThresholdParams& params, const Lexicons& lexicons) {
  return KernelRegressor(support, params, lexicons).threshold(query, scores);
}

std::string ThresholdMode::name() const {
  switch (kind) {
    case Kind::kMetaOnly:
      return "meta_only";
    case Kind::kCalibrated:
      return "calibrated";
    case Kind::kFixed:
      return "fixed";
  }
  return "unknown";
}

ThresholdMode ThresholdMode::parse(std::string_view name, double fixed_t) {
  if (name == "meta_only") return meta_only();
  if (name == "calibrated") return calibrated();
  if (name == "fixed") return fixed(fixed_t);
  throw ConfigError("unknown threshold mode \"" + std::string(name) +
                    "\" (expected meta_only, calibrated or fixed)");
}

std::vector<int> select_labels(const Vector& scores, double t) {
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (scores[i] > t) labels.push_back(static_cast<int>(i));
  }
  return labels;
}

EpisodePredictor::EpisodePredictor(const SupportSet& support, const ModelParams& model,
                                   const PredictContext& ctx, ScorerKind scorer)
    : support_(&support),
      model_(&model),
      ctx_(ctx),
      scorer_(scorer),
      reps_(scorer == ScorerKind::kPrototype
                ? compute_label_reps(support, ctx.labels, ctx.table, model.beta, &model.proj)
                : LabelReps{}),
      regressor_(support, model.threshold, ctx.lexicons) {}

RelevanceScores EpisodePredictor::scores(const Utterance& query) const {
  if (scorer_ == ScorerKind::kMatching) {
    return matching_scores(query, *support_, ctx_.labels.size(), ctx_.table, &model_->proj);
  }
  return relevance_scores(query, reps_, ctx_.table, &model_->proj);
}

Prediction EpisodePredictor::predict(const Utterance& query, const ThresholdMode& mode) const {
  return decide(query, scores(query), mode);
}

Prediction EpisodePredictor::decide(const Utterance& query, RelevanceScores scores,
                                    const ThresholdMode& mode) const {
  const auto& tp = model_->threshold;
  const Vector& s = scores.scores;
  Prediction p;
  p.t_meta = meta_threshold(s, tp.r);
  const auto w = regressor_.weights(query);
  const auto& counts = regressor_.support_label_counts();
  for (std::size_t j = 0; j < w.size(); ++j) {
    p.n_est += w[j] * counts[j];
    p.t_est += w[j] * kth_score_threshold(s, counts[j], tp.epsilon);
  }
  switch (mode.kind) {
    case ThresholdMode::Kind::kMetaOnly:
      p.t = p.t_meta;
      break;
    case ThresholdMode::Kind::kCalibrated:
      p.t = calibrated_threshold(p.t_meta, p.t_est, tp.alpha);
      break;
    case ThresholdMode::Kind::kFixed:
      p.t = mode.fixed_t;
      break;
  }
  if (mode.kind != ThresholdMode::Kind::kFixed && s.maxCoeff() - s.minCoeff() < 1e-9) {
    p.t = p.t_meta - tp.epsilon * (1.0 + std::abs(p.t_meta));
  }
  p.labels = select_labels(s, p.t);
  p.scores = std::move(scores);
  return p;
}

Prediction predict(const Utterance& query, const SupportSet& support, const ModelParams& model,
                   const ThresholdMode& mode, const PredictContext& ctx, ScorerKind scorer) {
  return EpisodePredictor(support, model, ctx, scorer).predict(query, mode);
}

}  // namespace fsml
