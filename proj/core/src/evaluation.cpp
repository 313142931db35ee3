#include "fsml/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "fsml/errors.hpp"

namespace fsml {
namespace {

using nlohmann::json;

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ConfigError("prediction and gold lists differ in length (" + std::to_string(a) + " vs " +
                      std::to_string(b) + ")");
  }
}

constexpr std::uint64_t kTargetRole = 1;
constexpr std::uint64_t kDevRole = 2;
constexpr std::uint64_t kSourceRole = 3;

std::vector<Episode> episodes_for(const Domain& domain, std::uint64_t role, int n_episodes,
                                  const CrossValidationConfig& cfg, std::uint64_t seed) {
  Rng rng = Rng(seed).fork(hash64(domain.name)).fork(role * 1000 + static_cast<std::uint64_t>(cfg.k));
  return build_split(domain, cfg.k, n_episodes, cfg.query_size, rng, cfg.support);
}

struct Summary {
  double f1_sum = 0.0;
  double acc_sum = 0.0;
  int n = 0;
};

}  // namespace

Confusion confusion_counts(std::span<const std::vector<int>> predictions,
                           std::span<const std::vector<int>> golds) {
  check_lengths(predictions.size(), golds.size());
  Confusion c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& g = golds[i];
    for (int l : p) {
      if (std::find(g.begin(), g.end(), l) != g.end()) {
        ++c.tp;
      } else {
        ++c.fp;
      }
    }
    for (int l : g) {
      if (std::find(p.begin(), p.end(), l) == p.end()) ++c.fn;
    }
  }
  return c;
}

double micro_f1(std::span<const std::vector<int>> predictions, std::span<const std::vector<int>> golds) {
  const auto c = confusion_counts(predictions, golds);
  const long denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double label_count_accuracy(std::span<const std::vector<int>> predictions,
                            std::span<const std::vector<int>> golds) {
  check_lengths(predictions.size(), golds.size());
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].size() == golds[i].size()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

json EvalReport::to_json() const {
  return {{"domain", domain},
          {"model", model},
          {"mode", mode},
          {"k", k},
          {"seed", seed},
          {"episodes", episode_f1.size()},
          {"mean_f1", mean_f1},
          {"std_f1", std_f1},
          {"label_count_accuracy", label_count_accuracy},
          {"episode_f1", episode_f1},
          {"episode_count_correct", episode_count_correct},
          {"episode_queries", episode_queries}};
}

std::string EvalReport::to_tsv() const {
  std::ostringstream out;
  out.precision(17);
  out << "episode_id\tf1\tn_correct_count\n";
  for (std::size_t e = 0; e < episode_f1.size(); ++e) {
    out << e << '\t' << episode_f1[e] << '\t' << episode_count_correct[e] << '\n';
  }
  return out.str();
}

EvalReport evaluate_split(std::span<const Episode> episodes, const ModelParams& model,
                          const ThresholdMode& mode, const PredictContext& ctx, ScorerKind scorer) {
  EvalReport report;
  report.mode = mode.name();
  if (!episodes.empty()) {
    report.domain = episodes.front().domain_name;
    report.k = episodes.front().support.k;
  }
  std::size_t hits = 0;
  std::size_t total = 0;
  std::vector<std::vector<int>> preds, golds;
  for (const auto& ep : episodes) {
    const EpisodePredictor predictor(ep.support, model, ctx, scorer);
    preds.clear();
    golds.clear();
    int correct = 0;
    for (const auto& q : ep.queries) {
      auto p = predictor.predict(q.utterance, mode);
      if (p.labels.size() == q.labels.size()) ++correct;
      preds.push_back(std::move(p.labels));
      golds.push_back(q.labels);
    }
    report.episode_f1.push_back(micro_f1(preds, golds));
    report.episode_count_correct.push_back(correct);
    report.episode_queries.push_back(static_cast<int>(ep.queries.size()));
    hits += correct;
    total += ep.queries.size();
  }
  const auto n = static_cast<double>(report.episode_f1.size());
  if (n > 0) {
    double sum = 0.0;
    for (double f : report.episode_f1) sum += f;
    report.mean_f1 = sum / n;
    double var = 0.0;
    for (double f : report.episode_f1) var += (f - report.mean_f1) * (f - report.mean_f1);
    report.std_f1 = std::sqrt(var / n);
  }
  report.label_count_accuracy = total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
  return report;
}

double tune_fixed_threshold(std::span<const Episode> dev, const ModelParams& model, const PredictContext& ctx,
                            ScorerKind scorer) {
  struct Scored {
    std::vector<Vector> scores;
    std::vector<std::vector<int>> golds;
  };
  std::vector<Scored> episodes;
  std::vector<double> pooled;
  for (const auto& ep : dev) {
    const EpisodePredictor predictor(ep.support, model, ctx, scorer);
    Scored s;
    for (const auto& q : ep.queries) {
      s.scores.push_back(predictor.scores(q.utterance).scores);
      s.golds.push_back(q.labels);
      pooled.insert(pooled.end(), s.scores.back().data(), s.scores.back().data() + s.scores.back().size());
    }
    episodes.push_back(std::move(s));
  }
  if (pooled.empty()) throw DataError("threshold tuning needs at least one dev query");
  std::sort(pooled.begin(), pooled.end());

  double best_t = pooled.front();
  double best_f1 = -1.0;
  std::vector<std::vector<int>> preds;
  for (int j = 0; j <= 20; ++j) {
    const auto pos = static_cast<std::size_t>(std::llround(j * 0.05 * static_cast<double>(pooled.size() - 1)));
    const double t = pooled[pos];
    double sum = 0.0;
    for (const auto& ep : episodes) {
      preds.clear();
      for (const auto& s : ep.scores) preds.push_back(select_labels(s, t));
      sum += micro_f1(preds, ep.golds);
    }
    const double f1 = sum / static_cast<double>(episodes.size());
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

double CrossValidationReport::mean_f1(const std::string& model, const std::string& mode) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& rot : rotations) {
    for (const auto& r : rot.reports) {
      if (r.model == model && r.mode == mode) {
        sum += r.mean_f1;
        ++n;
      }
    }
  }
  return n ? sum / n : 0.0;
}

double CrossValidationReport::mean_label_count_accuracy(const std::string& model, const std::string& mode) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& rot : rotations) {
    for (const auto& r : rot.reports) {
      if (r.model == model && r.mode == mode) {
        sum += r.label_count_accuracy;
        ++n;
      }
    }
  }
  return n ? sum / n : 0.0;
}

std::vector<double> CrossValidationReport::seed_means(const std::string& model, const std::string& mode) const {
  std::vector<std::uint64_t> seeds;
  std::map<std::uint64_t, Summary> by_seed;
  for (const auto& rot : rotations) {
    for (const auto& r : rot.reports) {
      if (r.model != model || r.mode != mode) continue;
      if (!by_seed.contains(rot.seed)) seeds.push_back(rot.seed);
      auto& s = by_seed[rot.seed];
      s.f1_sum += r.mean_f1;
      ++s.n;
    }
  }
  std::vector<double> out;
  for (auto seed : seeds) out.push_back(by_seed[seed].f1_sum / by_seed[seed].n);
  return out;
}

json CrossValidationReport::to_json() const {
  json rots = json::array();
  std::vector<std::pair<std::string, std::string>> rows;
  std::map<std::pair<std::string, std::string>, std::map<std::string, Summary>> per_target;
  for (const auto& rot : rotations) {
    json reports = json::array();
    for (const auto& r : rot.reports) {
      reports.push_back(r.to_json());
      const auto key = std::make_pair(r.model, r.mode);
      if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
      auto& s = per_target[key][rot.target];
      s.f1_sum += r.mean_f1;
      s.acc_sum += r.label_count_accuracy;
      ++s.n;
    }
    rots.push_back({{"target", rot.target},
                    {"dev", rot.dev},
                    {"sources", rot.sources},
                    {"seed", rot.seed},
                    {"beta", rot.beta},
                    {"r", rot.r},
                    {"train_report", rot.train_report},
                    {"reports", std::move(reports)}});
  }
  json summary = json::array();
  for (const auto& [model, mode] : rows) {
    json targets = json::object();
    for (const auto& [target, s] : per_target[{model, mode}]) {
      targets[target] = {{"mean_f1", s.f1_sum / s.n}, {"label_count_accuracy", s.acc_sum / s.n}};
    }
    const auto per_seed = seed_means(model, mode);
    summary.push_back({{"model", model},
                       {"mode", mode},
                       {"mean_f1", mean_f1(model, mode)},
                       {"label_count_accuracy", mean_label_count_accuracy(model, mode)},
                       {"seed_means", per_seed},
                       {"targets", std::move(targets)}});
  }
  return {{"k", k}, {"summary", std::move(summary)}, {"rotations", std::move(rots)}};
}

CrossValidationReport cross_validate(std::span<const Domain> domains, const EmbeddingTable& table,
                                     const Lexicons& lexicons, const CrossValidationConfig& cfg) {
  if (domains.size() < 3) {
    throw ConfigError("cross-validation needs at least 3 domains, got " + std::to_string(domains.size()));
  }
  if (cfg.seeds.empty()) throw ConfigError("cross-validation needs at least one seed");
  cfg.train.validate();

  CrossValidationReport report;
  report.k = cfg.k;
  const std::size_t n = domains.size();
  for (const auto seed : cfg.seeds) {
    for (std::size_t t = 0; t < n; ++t) {
      const Domain& target = domains[t];
      const Domain& dev = domains[(t + 1) % n];
      const PredictContext target_ctx{target.label_space, table, lexicons};
      const PredictContext dev_ctx{dev.label_space, table, lexicons};

      RotationResult rot;
      rot.target = target.name;
      rot.dev = dev.name;
      rot.seed = seed;
      std::vector<DomainEpisodes> sources;
      for (std::size_t s = 0; s < n; ++s) {
        if (s == t || s == (t + 1) % n) continue;
        sources.push_back({&domains[s], episodes_for(domains[s], kSourceRole, cfg.source_episodes, cfg, seed)});
        rot.sources.push_back(domains[s].name);
      }
      const auto dev_eps = episodes_for(dev, kDevRole, cfg.target_episodes, cfg, seed);
      const auto target_eps = episodes_for(target, kTargetRole, cfg.target_episodes, cfg, seed);

      TrainConfig tc = cfg.train;
      tc.seed = seed;
      std::vector<double> betas{tc.beta};
      if (tc.beta_sweep) betas = {0.1, 0.5, 0.9};

      std::optional<TrainResult> best;
      double best_dev = -1.0;
      json sweep = json::array();
      for (double beta : betas) {
        tc.beta = beta;
        auto trained = train_pipeline(sources, table, lexicons, tc);
        const double dev_f1 = evaluate_split(dev_eps, trained.model, ThresholdMode::calibrated(), dev_ctx).mean_f1;
        sweep.push_back({{"beta", beta}, {"dev_f1", dev_f1}});
        if (dev_f1 > best_dev) {
          best_dev = dev_f1;
          best = std::move(trained);
        }
      }
      ModelParams ours = std::move(best->model);
      ours.fixed_threshold = tune_fixed_threshold(dev_eps, ours, dev_ctx);
      rot.beta = ours.beta;
      rot.r = ours.threshold.r;
      rot.train_report = std::move(best->report);
      rot.train_report["beta_sweep"] = std::move(sweep);
      rot.train_report["fixed_threshold"] = *ours.fixed_threshold;

      auto add = [&](EvalReport r, const char* model) {
        r.model = model;
        r.seed = seed;
        rot.reports.push_back(std::move(r));
      };
      add(evaluate_split(target_eps, ours, ThresholdMode::calibrated(), target_ctx), "Ours");
      add(evaluate_split(target_eps, ours, ThresholdMode::meta_only(), target_ctx), "Ours");
      add(evaluate_split(target_eps, ours, ThresholdMode::fixed(*ours.fixed_threshold), target_ctx), "MPN+ALR");

      if (cfg.ablation) {
        // Baselines share the kernel and r of the full model but train their
        // own projection with beta = 0.
        Rng rng(seed);
        ModelParams mpn = ModelParams::initial(table.dim(), 0.0, tc.mlp_layers, tc.mlp_hidden, rng);
        mpn.threshold = ours.threshold;
        mpn = train_scorer(sources, std::move(mpn), tc, table).model;
        mpn.round_to_f32();
        const double t_mpn = tune_fixed_threshold(dev_eps, mpn, dev_ctx, ScorerKind::kPrototype);
        const double t_mmn = tune_fixed_threshold(dev_eps, mpn, dev_ctx, ScorerKind::kMatching);
        add(evaluate_split(target_eps, mpn, ThresholdMode::fixed(t_mpn), target_ctx, ScorerKind::kPrototype), "MPN");
        add(evaluate_split(target_eps, mpn, ThresholdMode::fixed(t_mmn), target_ctx, ScorerKind::kMatching), "MMN");
        rot.train_report["baseline_thresholds"] = {{"MPN", t_mpn}, {"MMN", t_mmn}};
      }
      report.rotations.push_back(std::move(rot));
    }
  }
  return report;
}

}  // namespace fsml
