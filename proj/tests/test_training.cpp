#include <gtest/gtest.h>

#include <cmath>

#include "fsml/errors.hpp"
#include "fsml/evaluation.hpp"
#include "fsml/lexicons.hpp"
#include "fsml/model_io.hpp"
#include "fsml/training.hpp"
#include "helpers.hpp"

using namespace fsml;
using namespace fsml::testing;

namespace {

double sigmoid_oracle(double x) { return 1.0 / (1.0 + std::exp(-x)); }

const Lexicons& lex() {
  static const Lexicons l = Lexicons::shipped();
  return l;
}

struct SynthSetup {
  std::vector<Domain> domains;
  EmbeddingTable table{1};
  std::vector<DomainEpisodes> sources;

  SynthSetup(int n_domains, int k, int episodes, int dim, std::uint64_t seed) {
    for (int d = 0; d < n_domains; ++d) domains.push_back(generate_synthetic(default_synth_spec(d, 5, 120), seed + d));
    table = toy_embed_corpus(domains, dim, seed);
    for (auto& d : domains) {
      Rng rng = Rng(seed).fork(hash64(d.name));
      sources.push_back({&d, build_split(d, k, episodes, 8, rng)});
    }
  }
};

ScorerEpisode random_scorer_episode(Rng& rng, int n_labels, int dim, int n_queries) {
  ScorerEpisode ep;
  for (int i = 0; i < n_labels; ++i) {
    Vector u(dim);
    for (auto& x : u) x = rng.approx_normal();
    ep.reps.push_back(u);
  }
  for (int q = 0; q < n_queries; ++q) {
    ScorerExample ex;
    ex.query = Vector(dim);
    for (auto& x : ex.query) x = rng.approx_normal();
    for (int l = 0; l < n_labels; ++l) {
      if (rng.bernoulli(0.4)) ex.gold.push_back(l);
    }
    if (ex.gold.empty()) ex.gold.push_back(0);
    ep.queries.push_back(ex);
  }
  return ep;
}

KernelEpisode random_kernel_episode(Rng& rng, int n_support, int n_queries) {
  KernelEpisode ep;
  const auto features = [&] {
    Vector f(kRawFeatureCount);
    f << static_cast<double>(1 + rng.uniform_int(12)), static_cast<double>(rng.uniform_int(3)),
        static_cast<double>(rng.uniform_int(3)), static_cast<double>(rng.uniform_int(2)),
        static_cast<double>(rng.uniform_int(2));
    return Vector(f / kFeatureNormalizer);
  };
  for (int j = 0; j < n_support; ++j) {
    ep.support_features.push_back(features());
    ep.support_counts.push_back(1 + static_cast<int>(rng.uniform_int(3)));
  }
  for (int q = 0; q < n_queries; ++q) ep.queries.push_back({features(), 1 + static_cast<int>(rng.uniform_int(3))});
  return ep;
}

std::vector<Vector> inputs_of(const KernelEpisode& ep) {
  std::vector<Vector> out = ep.support_features;
  for (const auto& q : ep.queries) out.push_back(q.features);
  return out;
}

}  // namespace

TEST(SigmoidLoss, ZeroScores) {
  const Vector zeros = Vector::Zero(4);
  const std::vector<int> gold{2};
  EXPECT_EQ(sigmoid_ce_loss(zeros, gold), 0.25);
  for (int n = 1; n <= 9; ++n) {
    for (int g = 0; g <= n; ++g) {
      std::vector<int> gs(g);
      for (int i = 0; i < g; ++i) gs[i] = i;
      EXPECT_EQ(sigmoid_ce_loss(Vector::Zero(n), gs), static_cast<double>(n - 2 * g) / (2.0 * n));
    }
  }
}

TEST(SigmoidLoss, SaturatesToMinusOne) {
  const std::vector<int> all{0, 1, 2};
  EXPECT_NEAR(sigmoid_ce_loss(Vector::Constant(3, 50.0), all), -1.0, 1e-6);
}

TEST(SigmoidLoss, PerLabelLoopOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(12));
    Vector s(n);
    for (auto& x : s) x = 4.0 * rng.approx_normal();
    std::vector<int> gold;
    for (int i = 0; i < n; ++i) {
      if (rng.bernoulli(0.3)) gold.push_back(i);
    }
    double oracle = 0.0;
    for (int i = 0; i < n; ++i) {
      const bool g = std::find(gold.begin(), gold.end(), i) != gold.end();
      oracle += g ? -sigmoid_oracle(s[i]) : sigmoid_oracle(s[i]);
    }
    oracle /= n;
    ASSERT_NEAR(sigmoid_ce_loss(s, gold), oracle, 1e-12);
  }
}

TEST(SigmoidLoss, RejectsBadGold) {
  const std::vector<int> bad{3};
  EXPECT_THROW(sigmoid_ce_loss(Vector::Zero(3), bad), ConfigError);
}

TEST(ScorerGradient, MatchesCentralDifferences) {
  Rng rng(2);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 3 + static_cast<int>(rng.uniform_int(3));
    const int n_labels = 2 + static_cast<int>(rng.uniform_int(3));
    const auto ep = random_scorer_episode(rng, n_labels, dim, 4);
    Matrix w(dim, dim);
    for (auto& x : w.reshaped()) x = 0.5 * rng.approx_normal();
    Matrix grad;
    scorer_loss(w, ep.reps, ep.queries, &grad);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      Matrix wp = w, wm = w;
      wp.reshaped()[i] += h;
      wm.reshaped()[i] -= h;
      const double num = (scorer_loss(wp, ep.reps, ep.queries) - scorer_loss(wm, ep.reps, ep.queries)) / (2 * h);
      ASSERT_LT(rel_error(grad.reshaped()[i], num), 1e-4) << "trial " << trial << " entry " << i;
    }
  }
}

TEST(KernelGradient, MatchesCentralDifferences) {
  Rng rng(3);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    ThresholdParams p;
    KernelEpisode ep;
    do {
      p.mlp = Mlp::random(kRawFeatureCount, 5, 1 + static_cast<int>(rng.uniform_int(3)), rng);
      p.rho = std::log(0.05 + 0.2 * rng.uniform());
      ep = random_kernel_episode(rng, 3, 4);
    } while (min_preactivation(p.mlp, inputs_of(ep)) <= 100 * h);
    KernelGradient g;
    kernel_loss(p, ep, ep.queries, &g);

    auto rp = p, rm = p;
    rp.rho += h;
    rm.rho -= h;
    const double num_rho = (kernel_loss(rp, ep, ep.queries) - kernel_loss(rm, ep, ep.queries)) / (2 * h);
    ASSERT_LT(rel_error(g.rho, num_rho), 1e-4) << "trial " << trial;

    for (std::size_t l = 0; l < p.mlp.layers().size(); ++l) {
      for (int which = 0; which < 2; ++which) {
        const auto size = which == 0 ? p.mlp.layers()[l].weights.size() : p.mlp.layers()[l].bias.size();
        for (Eigen::Index i = 0; i < size; ++i) {
          auto plus = p, minus = p;
          auto entry = [&](ThresholdParams& q) -> double& {
            return which == 0 ? q.mlp.layers()[l].weights.reshaped()[i] : q.mlp.layers()[l].bias[i];
          };
          entry(plus) += h;
          entry(minus) -= h;
          const double num = (kernel_loss(plus, ep, ep.queries) - kernel_loss(minus, ep, ep.queries)) / (2 * h);
          const double ana = which == 0 ? g.mlp[l].weights.reshaped()[i] : g.mlp[l].bias[i];
          ASSERT_LT(rel_error(ana, num), 1e-4) << "trial " << trial << " layer " << l << " entry " << i << " ana " << ana << " num " << num;
        }
      }
    }
  }
}

TEST(KernelLoss, CountMatchesRegressor) {
  Rng rng(4);
  ThresholdParams p;
  p.mlp = Mlp::random(kRawFeatureCount, 10, 2, rng);
  const auto ep = random_kernel_episode(rng, 5, 3);
  for (const auto& q : ep.queries) {
    const Vector fq = p.mlp.forward(q.features);
    double z = 0.0, n = 0.0;
    for (std::size_t j = 0; j < ep.support_features.size(); ++j) {
      const double k = kernel_weight(fq, p.mlp.forward(ep.support_features[j]), p.lambda());
      z += k;
      n += k * ep.support_counts[j];
    }
    EXPECT_NEAR(kernel_label_count(p, ep, q.features), n / z, 1e-12);
  }
}

TEST(PretrainKernel, SingleLabelEverywhereHasZeroLossAndGradient) {
  Rng rng(5);
  ThresholdParams p;
  p.mlp = Mlp::random(kRawFeatureCount, 10, 1, rng);
  auto ep = random_kernel_episode(rng, 4, 6);
  for (auto& c : ep.support_counts) c = 1;
  for (auto& q : ep.queries) q.gold_count = 1;
  KernelGradient g;
  EXPECT_NEAR(kernel_loss(p, ep, ep.queries, &g), 0.0, 1e-24);
  EXPECT_NEAR(g.rho, 0.0, 1e-15);
  for (const auto& layer : g.mlp) {
    EXPECT_LT(layer.weights.cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(layer.bias.cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(PretrainKernel, BeatsMeanBaselineOnSynthetic) {
  SynthSetup s(2, 1, 40, 16, 11);
  TrainConfig cfg;
  cfg.kernel_epochs = 30;
  Rng rng(1);
  ThresholdParams p;
  p.mlp = Mlp::random(kRawFeatureCount, 10, 1, rng);
  const std::vector<DomainEpisodes> train{s.sources[0]};
  const auto trained = pretrain_kernel(train, p, cfg, lex());
  EXPECT_LT(trained.epoch_loss.back(), trained.epoch_loss.front());

  double mse = 0.0, base = 0.0, mean = 0.0;
  int n = 0;
  for (const auto& ep : s.sources[1].episodes) {
    for (const auto& q : ep.queries) mean += static_cast<double>(q.labels.size()), ++n;
  }
  mean /= n;
  for (const auto& ep : s.sources[1].episodes) {
    const auto kep = prepare_kernel_episode(ep, lex());
    for (const auto& q : kep.queries) {
      const double e = kernel_label_count(trained.params, kep, q.features) - q.gold_count;
      mse += e * e;
      base += (mean - q.gold_count) * (mean - q.gold_count);
    }
  }
  EXPECT_LT(mse, base);
}

TEST(TrainScorer, ZeroLearningRateIsBitExactNoOp) {
  SynthSetup s(1, 1, 5, 8, 3);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.kernel_epochs = 3;
  cfg.lr_proj = 0.0;
  cfg.lr_kernel = 0.0;
  Rng rng(1);
  auto model = ModelParams::initial(8, 0.5, 2, 10, rng);
  model.proj = Matrix::Random(8, 8);
  const auto out = train_scorer(s.sources, model, cfg, s.table);
  EXPECT_TRUE(out.model == model);
  const auto k = pretrain_kernel(s.sources, model.threshold, cfg, lex());
  EXPECT_TRUE(k.params == model.threshold);
}

TEST(TrainScorer, LossDecreasesOnSyntheticDomain) {
  SynthSetup s(1, 1, 20, 16, 5);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.lr_proj = 0.5;
  Rng rng(1);
  const auto out = train_scorer(s.sources, ModelParams::initial(16, 0.5, 1, 10, rng), cfg, s.table);
  ASSERT_EQ(out.epoch_loss.size(), 30u);
  EXPECT_LT(out.epoch_loss.back(), out.epoch_loss.front());
}

TEST(TrainScorer, NonFiniteLossAborts) {
  SynthSetup s(1, 1, 3, 8, 5);
  TrainConfig cfg;
  cfg.epochs = 1;
  Rng rng(1);
  auto model = ModelParams::initial(8, 0.5, 1, 10, rng);
  model.proj(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train_scorer(s.sources, model, cfg, s.table), NumericError);
}

TEST(FitR, TopOneGoldPicksSmallestPerfectGridPoint) {
  std::vector<std::vector<ScoredQuery>> eps(1);
  Rng rng(6);
  for (int q = 0; q < 10; ++q) {
    Vector s(3);
    for (auto& x : s) x = rng.approx_normal();
    int top;
    s.maxCoeff(&top);
    eps[0].push_back({s, {top}});
  }
  const auto fit = fit_r_on_scores(eps, 0.01);
  EXPECT_EQ(fit.f1, 1.0);
  double oracle = -1.0;
  for (int k = 0; k <= 100 && oracle < 0; ++k) {
    const double r = k * 0.01;
    bool perfect = true;
    for (const auto& q : eps[0]) perfect = perfect && select_labels(q.scores, meta_threshold(q.scores, r)) == q.gold;
    if (perfect) oracle = r;
  }
  EXPECT_EQ(fit.r, oracle);
  EXPECT_EQ(fit.evaluations, 101);
}

TEST(FitR, TwoDensityConstructionFindsHalf) {
  Vector dense(4), sparse(4);
  dense << 1.0, 0.51, 0.0, 0.0;
  sparse << 1.0, 0.49, 0.0, 0.0;
  std::vector<std::vector<ScoredQuery>> eps{{{dense, {0, 1}}, {sparse, {0}}}};
  const auto fit = fit_r_on_scores(eps, 0.01);
  EXPECT_EQ(fit.f1, 1.0);
  EXPECT_NEAR(fit.r, 0.5, 0.01 + 1e-12);
}

TEST(FitR, GridSizes) {
  std::vector<std::vector<ScoredQuery>> eps{{{Vector::LinSpaced(3, 0, 1), {2}}}};
  EXPECT_EQ(fit_r_on_scores(eps, 0.01).evaluations, 101);
  EXPECT_EQ(fit_r_on_scores(eps, 0.1).evaluations, 11);
  EXPECT_EQ(fit_r_on_scores(eps, 0.25).evaluations, 5);
  EXPECT_THROW(fit_r_on_scores(eps, 0.0), ConfigError);
}

TEST(TrainPipeline, DeterministicAndReportsAllStages) {
  SynthSetup s(2, 1, 10, 16, 7);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.kernel_epochs = 2;
  const auto a = train_pipeline(s.sources, s.table, lex(), cfg);
  const auto b = train_pipeline(s.sources, s.table, lex(), cfg);
  EXPECT_EQ(model_to_json(a.model).dump(), model_to_json(b.model).dump());
  EXPECT_EQ(a.report.dump(), b.report.dump());
  for (const char* key : {"pretrain_kernel", "train_scorer", "fit_r"}) EXPECT_TRUE(a.report.contains(key)) << key;
  EXPECT_EQ(a.report["fit_r"]["evaluations"], 101);
  EXPECT_EQ(a.report["fit_r"]["r"].get<double>(), a.model.threshold.r);
}

TEST(TrainPipeline, NoAlrChangesTheProjection) {
  // Two labels that always co-occur share every prototype.
  std::vector<LabeledUtterance> pool;
  for (int i = 0; i < 40; ++i) {
    const std::string id = "u" + std::to_string(i);
    if (i % 3 == 0) pool.push_back(item(id, {0, 1}, {"tok" + std::to_string(i % 7), "and", "x"}));
    else pool.push_back(item(id, {2}, {"tok" + std::to_string(i % 5), "y"}));
  }
  Domain d = make_domain({"play_song", "set_volume", "weather"}, pool);
  const std::vector<Domain> domains{d};
  const auto table = toy_embed_corpus(domains, 8, 1);
  Rng rng(2);
  const std::vector<DomainEpisodes> sources{{&domains[0], build_split(domains[0], 1, 6, 6, rng)}};
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.kernel_epochs = 1;
  cfg.beta = 0.5;
  const auto with = train_pipeline(sources, table, lex(), cfg);
  cfg.beta = 0.0;
  const auto without = train_pipeline(sources, table, lex(), cfg);
  EXPECT_GT((with.model.proj - without.model.proj).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(without.model.beta, 0.0);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lr_proj = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.mlp_layers = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
