#include "fsml/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fsml/errors.hpp"
#include "fsml/evaluation.hpp"
#include "fsml/labelrep.hpp"
#include "fsml/thresholding.hpp"

namespace fsml {
namespace {

constexpr std::uint64_t kKernelStream = 0x6b65726e;
constexpr std::uint64_t kScorerStream = 0x73636f72;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_finite(double loss, const char* stage, int epoch, std::size_t step) {
  if (std::isfinite(loss)) return;
  std::ostringstream msg;
  msg << stage << ": non-finite loss " << loss << " at epoch " << epoch << ", step " << step;
  throw NumericError(msg.str());
}

/// Visit order for one epoch: each domain's episodes shuffled, then
/// interleaved round-robin across domains.
std::vector<std::pair<std::size_t, std::size_t>> round_robin(std::span<const DomainEpisodes> sources,
                                                             Rng& rng) {
  std::vector<std::vector<std::size_t>> per_domain(sources.size());
  std::size_t longest = 0;
  for (std::size_t d = 0; d < sources.size(); ++d) {
    per_domain[d].resize(sources[d].episodes.size());
    for (std::size_t i = 0; i < per_domain[d].size(); ++i) per_domain[d][i] = i;
    rng.shuffle(per_domain[d]);
    longest = std::max(longest, per_domain[d].size());
  }
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t i = 0; i < longest; ++i) {
    for (std::size_t d = 0; d < sources.size(); ++d) {
      if (i < per_domain[d].size()) order.emplace_back(d, per_domain[d][i]);
    }
  }
  return order;
}

template <typename T>
std::vector<std::span<const T>> batches(const std::vector<T>& items, int batch_size) {
  std::vector<std::span<const T>> out;
  for (std::size_t i = 0; i < items.size(); i += batch_size) {
    out.emplace_back(items.data() + i, std::min<std::size_t>(batch_size, items.size() - i));
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (kernel_epochs < 1) throw ConfigError("kernel_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_proj >= 0.0) || !(lr_kernel >= 0.0)) throw ConfigError("learning rates must be non-negative");
  if (!(r_grid_step > 0.0 && r_grid_step <= 1.0)) throw ConfigError("r_grid_step must be in (0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must be in [0, 1]");
  if (mlp_layers < 1 || mlp_layers > 3) throw ConfigError("mlp_layers must be 1, 2 or 3");
  if (mlp_hidden < 1) throw ConfigError("mlp_hidden must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

double sigmoid_ce_loss(const Vector& scores, std::span<const int> gold) {
  const auto n = scores.size();
  if (n == 0) throw ConfigError("loss of empty scores");
  std::vector<bool> is_gold(n, false);
  for (int g : gold) {
    if (g < 0 || g >= n) throw ConfigError("gold label out of range");
    is_gold[g] = true;
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += is_gold[i] ? -sigmoid(scores[i]) : sigmoid(scores[i]);
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Scorer

ScorerEpisode prepare_scorer_episode(const Episode& episode, const LabelSpace& labels,
                                     const EmbeddingTable& table, double beta) {
  ScorerEpisode out;
  out.reps = compute_label_reps(episode.support, labels, table, beta).anchored;
  out.queries.reserve(episode.queries.size());
  for (const auto& q : episode.queries) out.queries.push_back({utterance_embedding(q.utterance, table), q.labels});
  return out;
}

double scorer_loss(const Matrix& W, std::span<const Vector> reps, std::span<const ScorerExample> batch,
                   Matrix* grad) {
  if (batch.empty()) throw ConfigError("empty scorer batch");
  const auto n = static_cast<Eigen::Index>(reps.size());
  Matrix U(W.cols(), n);
  for (Eigen::Index i = 0; i < n; ++i) U.col(i) = reps[i];
  const Matrix WU = W * U;
  if (grad) *grad = Matrix::Zero(W.rows(), W.cols());

  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const Vector wq = W * ex.query;
    const Vector f = WU.transpose() * wq;
    Vector sign = Vector::Ones(n);
    for (int g : ex.gold) sign[g] = -1.0;
    Vector g(n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = sigmoid(f[i]);
      loss += sign[i] * s;
      g[i] = sign[i] * s * (1.0 - s) / static_cast<double>(n);
    }
    total += loss / static_cast<double>(n);
    if (grad) {
      // d f_i / dW = W (q u_i^T + u_i q^T)
      grad->noalias() += scale * (wq * (U * g).transpose());
      grad->noalias() += scale * ((WU * g) * ex.query.transpose());
    }
  }
  return total * scale;
}

ScorerTrainResult train_scorer(std::span<const DomainEpisodes> sources, ModelParams model,
                               const TrainConfig& cfg, const EmbeddingTable& table) {
  cfg.validate();
  std::vector<std::vector<ScorerEpisode>> prepared(sources.size());
  for (std::size_t d = 0; d < sources.size(); ++d) {
    for (const auto& ep : sources[d].episodes) {
      prepared[d].push_back(prepare_scorer_episode(ep, sources[d].domain->label_space, table, model.beta));
    }
  }

  Rng rng = Rng(cfg.seed).fork(kScorerStream);
  ScorerTrainResult result;
  Matrix grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t count = 0;
    std::size_t step = 0;
    for (const auto& [d, e] : round_robin(sources, rng)) {
      const auto& ep = prepared[d][e];
      for (const auto batch : batches(ep.queries, cfg.batch_size)) {
        const double loss = scorer_loss(model.proj, ep.reps, batch, &grad);
        check_finite(loss, "train_scorer", epoch, step);
        model.proj -= cfg.lr_proj * grad;
        total += loss * static_cast<double>(batch.size());
        count += batch.size();
        ++step;
      }
    }
    result.epoch_loss.push_back(count ? total / static_cast<double>(count) : 0.0);
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Kernel regression

KernelEpisode prepare_kernel_episode(const Episode& episode, const Lexicons& lexicons) {
  KernelEpisode out;
  for (const auto& item : episode.support.items) {
    out.support_features.push_back(extract_features(item.utterance, lexicons).normalized());
    out.support_counts.push_back(static_cast<int>(item.labels.size()));
  }
  for (const auto& q : episode.queries) {
    out.queries.push_back({extract_features(q.utterance, lexicons).normalized(), static_cast<int>(q.labels.size())});
  }
  return out;
}

double kernel_label_count(const ThresholdParams& params, const KernelEpisode& episode,
                          const Vector& query_features) {
  const Vector q = params.mlp.forward(query_features);
  const double lambda = params.lambda();
  std::vector<double> dist;
  for (const auto& s : episode.support_features) dist.push_back((q - params.mlp.forward(s)).squaredNorm());
  const double nearest = *std::min_element(dist.begin(), dist.end());
  double z = 0.0;
  double n = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) {
    const double w = std::exp(-(dist[j] - nearest) / lambda);
    z += w;
    n += w * episode.support_counts[j];
  }
  return n / z;
}

double kernel_loss(const ThresholdParams& params, const KernelEpisode& episode,
                   std::span<const KernelExample> batch, KernelGradient* grad) {
  if (batch.empty()) throw ConfigError("empty kernel batch");
  const std::size_t m = episode.support_features.size();
  if (m == 0) throw DataError("kernel regression needs a non-empty support set");
  const double lambda = params.lambda();
  const Mlp& mlp = params.mlp;

  std::vector<Mlp::Trace> support_traces(m);
  std::vector<Vector> phi(m);
  for (std::size_t j = 0; j < m; ++j) phi[j] = mlp.forward(episode.support_features[j], support_traces[j]);

  std::vector<Vector> support_grads;
  if (grad) {
    grad->rho = 0.0;
    grad->mlp = mlp.zero_like();
    support_grads.assign(m, Vector::Zero(mlp.output_dim()));
  }

  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  std::vector<double> dist(m), p(m);
  for (const auto& ex : batch) {
    Mlp::Trace trace;
    const Vector q = mlp.forward(ex.features, trace);
    for (std::size_t j = 0; j < m; ++j) dist[j] = (q - phi[j]).squaredNorm();
    const double nearest = *std::min_element(dist.begin(), dist.end());
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      p[j] = std::exp(-(dist[j] - nearest) / lambda);
      z += p[j];
    }
    double n = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      p[j] /= z;
      n += p[j] * episode.support_counts[j];
    }
    const double err = n - ex.gold_count;
    total += err * err;
    if (!grad) continue;

    const double dl_dn = 2.0 * err * scale;
    Vector dq = Vector::Zero(q.size());
    for (std::size_t j = 0; j < m; ++j) {
      const double centered = episode.support_counts[j] - n;
      // dn/drho = sum_j p_j (m_j - n) d_j / lambda;  dn/dd_j = -p_j (m_j - n) / lambda
      grad->rho += dl_dn * p[j] * centered * dist[j] / lambda;
      const double c = -dl_dn * p[j] * centered / lambda;
      const Vector diff = 2.0 * (q - phi[j]);
      dq += c * diff;
      support_grads[j] -= c * diff;
    }
    mlp.backward(trace, dq, grad->mlp);
  }
  if (grad) {
    for (std::size_t j = 0; j < m; ++j) mlp.backward(support_traces[j], support_grads[j], grad->mlp);
  }
  return total * scale;
}

KernelTrainResult pretrain_kernel(std::span<const DomainEpisodes> sources, ThresholdParams params,
                                  const TrainConfig& cfg, const Lexicons& lexicons) {
  cfg.validate();
  std::vector<std::vector<KernelEpisode>> prepared(sources.size());
  for (std::size_t d = 0; d < sources.size(); ++d) {
    for (const auto& ep : sources[d].episodes) prepared[d].push_back(prepare_kernel_episode(ep, lexicons));
  }

  Rng rng = Rng(cfg.seed).fork(kKernelStream);
  KernelTrainResult result;
  KernelGradient grad;
  for (int epoch = 0; epoch < cfg.kernel_epochs; ++epoch) {
    double total = 0.0;
    std::size_t count = 0;
    std::size_t step = 0;
    for (const auto& [d, e] : round_robin(sources, rng)) {
      const auto& ep = prepared[d][e];
      for (const auto batch : batches(ep.queries, cfg.batch_size)) {
        const double loss = kernel_loss(params, ep, batch, &grad);
        check_finite(loss, "pretrain_kernel", epoch, step);
        params.rho -= cfg.lr_kernel * grad.rho;
        auto& layers = params.mlp.layers();
        for (std::size_t l = 0; l < layers.size(); ++l) {
          layers[l].weights -= cfg.lr_kernel * grad.mlp[l].weights;
          layers[l].bias -= cfg.lr_kernel * grad.mlp[l].bias;
        }
        total += loss * static_cast<double>(batch.size());
        count += batch.size();
        ++step;
      }
    }
    result.epoch_loss.push_back(count ? total / static_cast<double>(count) : 0.0);
  }
  result.params = std::move(params);
  return result;
}

// ---------------------------------------------------------------------------
// Interpolation rate

FitRResult fit_r_on_scores(std::span<const std::vector<ScoredQuery>> episodes, double step, double epsilon) {
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("r grid step must be in (0, 1]");
  const auto n_steps = static_cast<int>(std::ceil(1.0 / step - 1e-9));
  FitRResult best{0.0, -1.0, 0};
  std::vector<std::vector<int>> preds, golds;
  for (int k = 0; k <= n_steps; ++k) {
    const double r = std::min(1.0, k * step);
    double f1_sum = 0.0;
    for (const auto& ep : episodes) {
      preds.clear();
      golds.clear();
      for (const auto& q : ep) {
        double t = meta_threshold(q.scores, r);
        if (q.scores.maxCoeff() - q.scores.minCoeff() < 1e-9) t -= epsilon * (1.0 + std::abs(t));
        preds.push_back(select_labels(q.scores, t));
        golds.push_back(q.gold);
      }
      f1_sum += micro_f1(preds, golds);
    }
    const double f1 = episodes.empty() ? 0.0 : f1_sum / static_cast<double>(episodes.size());
    ++best.evaluations;
    if (f1 > best.f1) {
      best.f1 = f1;
      best.r = r;
    }
  }
  return best;
}

FitRResult fit_r(std::span<const DomainEpisodes> sources, const ModelParams& model, const TrainConfig& cfg,
                 const EmbeddingTable& table) {
  std::vector<std::vector<ScoredQuery>> scored;
  for (const auto& src : sources) {
    for (const auto& ep : src.episodes) {
      const auto reps = compute_label_reps(ep.support, src.domain->label_space, table, model.beta, &model.proj);
      std::vector<ScoredQuery> qs;
      for (const auto& q : ep.queries) qs.push_back({relevance_scores(q.utterance, reps, table, &model.proj).scores, q.labels});
      scored.push_back(std::move(qs));
    }
  }
  return fit_r_on_scores(scored, cfg.r_grid_step, model.threshold.epsilon);
}

// ---------------------------------------------------------------------------

TrainResult train_pipeline(std::span<const DomainEpisodes> sources, const EmbeddingTable& table,
                           const Lexicons& lexicons, const TrainConfig& cfg) {
  cfg.validate();
  if (sources.empty()) throw ConfigError("training needs at least one source domain");

  Rng rng(cfg.seed);
  ModelParams model = ModelParams::initial(table.dim(), cfg.beta, cfg.mlp_layers, cfg.mlp_hidden, rng);
  model.threshold.alpha = cfg.alpha;
  model.threshold.epsilon = cfg.epsilon;

  auto kernel = pretrain_kernel(sources, model.threshold, cfg, lexicons);
  model.threshold = std::move(kernel.params);

  auto scorer = train_scorer(sources, std::move(model), cfg, table);
  model = std::move(scorer.model);
  model.round_to_f32();

  const auto fitted = fit_r(sources, model, cfg, table);
  model.threshold.r = fitted.r;

  nlohmann::json names = nlohmann::json::array();
  std::size_t n_episodes = 0;
  for (const auto& s : sources) {
    names.push_back(s.domain->name);
    n_episodes += s.episodes.size();
  }
  TrainResult result;
  result.report = {
      {"sources", names},
      {"episodes", n_episodes},
      {"seed", cfg.seed},
      {"beta", model.beta},
      {"pretrain_kernel", {{"epoch_loss", kernel.epoch_loss}, {"rho", model.threshold.rho}, {"lambda", model.threshold.lambda()}}},
      {"train_scorer", {{"epoch_loss", scorer.epoch_loss}}},
      {"fit_r", {{"r", fitted.r}, {"f1", fitted.f1}, {"evaluations", fitted.evaluations}}},
  };
  result.model = std::move(model);
  return result;
}

}  // namespace fsml
