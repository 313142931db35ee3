#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <tuple>

#include "cli.hpp"
#include "fsml/evaluation.hpp"
#include "fsml/labelrep.hpp"
#include "fsml/lexicons.hpp"
#include "fsml/thresholding.hpp"
#include "fsml/training.hpp"
#include "helpers.hpp"

using namespace fsml;
using namespace fsml::testing;
namespace fs = std::filesystem;

namespace {

constexpr double kKernelTol = 1e-10;
constexpr double kWideKernelTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr double kKinkMargin = 100 * kFdStep;
constexpr double kSeparationTol = 1e-9;
constexpr double kLossTol = 1e-12;
constexpr double kF1Gap = 0.02;
constexpr double kCountAccuracyGap = 0.03;

const Lexicons& lex() {
  static const Lexicons l = Lexicons::shipped();
  return l;
}

/// Outcome of one criterion: pass flag plus a short measurement summary.
struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

bool run_criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  std::printf("%s  %-28s %7.2fs (budget %.0fs)  %s%s\n", pass ? "PASS" : "FAIL", name.c_str(), secs, budget_s,
              o.detail.c_str(), in_time ? "" : "  [over time budget]");
  std::fflush(stdout);
  return pass;
}

Vector random_scores(Rng& rng, int n) {
  Vector s(n);
  for (auto& x : s) x = 3.0 * rng.approx_normal();
  return s;
}

LabeledUtterance random_item(Rng& rng, const std::string& id, int n_labels) {
  static const std::vector<std::string> vocab{"and", "or", "what", "where", "book", "find", "?", ".", ",",
                                              "zop", "kel", "mir", "tan", "vos"};
  std::vector<std::string> tokens;
  const int len = 1 + static_cast<int>(rng.uniform_int(10));
  for (int i = 0; i < len; ++i) tokens.push_back(vocab[rng.uniform_int(vocab.size())]);
  std::vector<int> labels;
  const int m = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_labels)));
  for (int l = 0; l < m; ++l) labels.push_back(l);
  return item(id, labels, tokens);
}

ThresholdParams random_params(Rng& rng) {
  ThresholdParams p;
  p.mlp = Mlp::random(kRawFeatureCount, 10, 1 + static_cast<int>(rng.uniform_int(3)), rng);
  p.rho = 2.0 * rng.uniform() - 1.0;
  return p;
}

Outcome threshold_algebra() {
  Rng rng(101);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(12));
    const Vector s = random_scores(rng, n);
    const double lo = s.minCoeff(), hi = s.maxCoeff();
    violations += meta_threshold(s, 0.0) != lo;
    violations += meta_threshold(s, 1.0) != hi;
    const double r = rng.uniform();
    const double tm = meta_threshold(s, r);
    violations += tm < lo - 1e-12 || tm > hi + 1e-12;

    const double te = 3.0 * rng.approx_normal();
    const double a = rng.uniform();
    const double tc = calibrated_threshold(tm, te, a);
    violations += tc < std::min(tm, te) - 1e-12 || tc > std::max(tm, te) + 1e-12;
    violations += calibrated_threshold(tm, te, 1.0) != tm;
    violations += calibrated_threshold(tm, te, 0.0) != te;

    double prev = kth_score_threshold(s, 0);
    for (int k = 1; k <= n + 1; ++k) {
      const double cur = kth_score_threshold(s, k);
      violations += cur > prev;
      prev = cur;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over 1000 vectors"};
}

Outcome kernel_oracle() {
  Rng rng(102);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = random_params(rng);
    std::vector<LabeledUtterance> items;
    const int m = 1 + static_cast<int>(rng.uniform_int(8));
    for (int j = 0; j < m; ++j) items.push_back(random_item(rng, "s" + std::to_string(j), 4));
    const auto support = support_of(items);
    const auto query = random_item(rng, "q", 4).utterance;
    const Vector scores = random_scores(rng, 4);

    const Vector fq = project_features(extract_features(query, lex()), p.mlp);
    double z = 0.0, num = 0.0, num_t = 0.0;
    for (const auto& it : items) {
      const Vector fs = project_features(extract_features(it.utterance, lex()), p.mlp);
      const double k = std::exp(-(fq - fs).squaredNorm() / std::exp(p.rho));
      const auto c = static_cast<int>(it.labels.size());
      z += k;
      num += k * c;
      num_t += k * kth_score_threshold(scores, c, p.epsilon);
    }
    worst = std::max(worst, std::abs(estimate_label_count(query, support, p, lex()) - num / z));
    worst = std::max(worst, std::abs(estimate_threshold(query, support, scores, p, lex()) - num_t / z));
  }

  double worst_wide = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_params(rng);
    p.rho = std::log(1e12);
    std::vector<LabeledUtterance> items;
    double sum = 0.0;
    for (int j = 0; j < 7; ++j) {
      items.push_back(random_item(rng, "s" + std::to_string(j), 4));
      sum += static_cast<double>(items.back().labels.size());
    }
    const double n = estimate_label_count(random_item(rng, "q", 4).utterance, support_of(items), p, lex());
    worst_wide = std::max(worst_wide, std::abs(n - sum / 7.0));
  }
  std::ostringstream d;
  d << "max |err| " << worst << " (tol " << kKernelTol << "), wide-bandwidth " << worst_wide << " (tol "
    << kWideKernelTol << ")";
  return {worst <= kKernelTol && worst_wide <= kWideKernelTol, d.str()};
}

Outcome gradients() {
  Rng rng(103);
  const double h = kFdStep;
  double worst = 0.0;
  int redrawn = 0;
  std::string where;
  const auto track = [&](double ana, double num, const std::string& what) {
    const double e = rel_error(ana, num);
    if (e > worst) {
      worst = e;
      std::ostringstream w;
      w << what << " analytic " << ana << " numeric " << num;
      where = w.str();
    }
  };
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 3 + static_cast<int>(rng.uniform_int(3));
    const int n_labels = 2 + static_cast<int>(rng.uniform_int(3));
    std::vector<Vector> reps;
    for (int i = 0; i < n_labels; ++i) {
      Vector u(dim);
      for (auto& x : u) x = rng.approx_normal();
      reps.push_back(u);
    }
    std::vector<ScorerExample> queries;
    for (int q = 0; q < 4; ++q) {
      ScorerExample ex{Vector(dim), {}};
      for (auto& x : ex.query) x = rng.approx_normal();
      for (int l = 0; l < n_labels; ++l) {
        if (rng.bernoulli(0.4)) ex.gold.push_back(l);
      }
      if (ex.gold.empty()) ex.gold.push_back(0);
      queries.push_back(ex);
    }
    Matrix w(dim, dim);
    for (auto& x : w.reshaped()) x = 0.5 * rng.approx_normal();
    Matrix grad;
    scorer_loss(w, reps, queries, &grad);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      Matrix wp = w, wm = w;
      wp.reshaped()[i] += h;
      wm.reshaped()[i] -= h;
      const double num = (scorer_loss(wp, reps, queries) - scorer_loss(wm, reps, queries)) / (2 * h);
      track(grad.reshaped()[i], num, "episode " + std::to_string(trial) + " W");
    }

    ThresholdParams p;
    KernelEpisode ep;
    const auto features = [&] {
      Vector f(kRawFeatureCount);
      f << static_cast<double>(1 + rng.uniform_int(12)), static_cast<double>(rng.uniform_int(3)),
          static_cast<double>(rng.uniform_int(3)), static_cast<double>(rng.uniform_int(2)),
          static_cast<double>(rng.uniform_int(2));
      return Vector(f / kFeatureNormalizer);
    };
    for (;;) {
      p.mlp = Mlp::random(kRawFeatureCount, 5, 1 + static_cast<int>(rng.uniform_int(3)), rng);
      p.rho = std::log(0.05 + 0.2 * rng.uniform());
      ep = KernelEpisode{};
      for (int j = 0; j < 3; ++j) {
        ep.support_features.push_back(features());
        ep.support_counts.push_back(1 + static_cast<int>(rng.uniform_int(3)));
      }
      for (int q = 0; q < 4; ++q) ep.queries.push_back({features(), 1 + static_cast<int>(rng.uniform_int(3))});
      std::vector<Vector> inputs = ep.support_features;
      for (const auto& q : ep.queries) inputs.push_back(q.features);
      if (min_preactivation(p.mlp, inputs) > kKinkMargin) break;
      ++redrawn;
    }
    KernelGradient g;
    kernel_loss(p, ep, ep.queries, &g);
    auto rp = p, rm = p;
    rp.rho += h;
    rm.rho -= h;
    track(g.rho, (kernel_loss(rp, ep, ep.queries) - kernel_loss(rm, ep, ep.queries)) / (2 * h),
          "episode " + std::to_string(trial) + " rho");
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
          track(ana, num, "episode " + std::to_string(trial) + " mlp layer " + std::to_string(l));
        }
      }
    }
  }
  std::ostringstream d;
  d << "max relative error " << worst << " over 50 episodes (tol " << kGradTol << "), " << redrawn
    << " kernel episodes redrawn for a ReLU kink within " << kKinkMargin;
  if (worst >= kGradTol) d << ", worst at " << where;
  return {worst < kGradTol, d.str()};
}

Outcome alr_separation() {
  Rng rng(104);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 2 + static_cast<int>(rng.uniform_int(8));
    const int shared = 1 + static_cast<int>(rng.uniform_int(4));
    std::vector<LabeledUtterance> pool;
    for (int j = 0; j < shared; ++j) {
      pool.push_back(item("x" + std::to_string(j), {0, 1}, std::vector<std::string>(1 + rng.uniform_int(4), "t")));
    }
    const auto d = make_domain({"alpha_one", "beta_two"}, pool);
    const auto t = random_table(d, dim, rng);
    const auto s = support_of(d.pool);
    const double beta = rng.uniform();
    Matrix w(dim, dim);
    for (auto& x : w.reshaped()) x = rng.approx_normal();
    const Matrix* proj = trial % 2 == 0 ? nullptr : &w;
    Vector ea = label_name_embedding("alpha_one", t), eb = label_name_embedding("beta_two", t);
    if (proj) {
      ea = w * ea;
      eb = w * eb;
    }
    const double dist =
        (anchored_rep(0, s, d.label_space, t, beta, proj) - anchored_rep(1, s, d.label_space, t, beta, proj)).norm();
    worst = std::max(worst, std::abs(dist - beta * (ea - eb).norm()));
  }
  std::ostringstream d;
  d << "max |err| " << worst << " over 200 instances (tol " << kSeparationTol << ")";
  return {worst <= kSeparationTol, d.str()};
}

Outcome episode_construction() {
  std::vector<Domain> domains;
  for (int d = 0; d < 3; ++d) domains.push_back(generate_synthetic(default_synth_spec(d), 200 + d));
  Rng rng(105);
  int crit1_fail = 0, checked = 0, minimal_fail = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& d = domains[i % 3];
    const int k = 1 + i % 5;
    const auto s = build_support_set(d, k, rng);
    crit1_fail += !satisfies_k_shot(s, d.n_labels(), k);
  }
  for (int i = 0; i < 1000; ++i) {
    const auto& d = domains[i % 3];
    const int k = 1 + i % 5;
    const auto s = build_support_set(d, k, rng, {.skip_probability = 0.0});
    crit1_fail += !satisfies_k_shot(s, d.n_labels(), k);
    if (s.size() > 25) continue;
    ++checked;
    for (std::size_t drop = 0; drop < s.size(); ++drop) {
      SupportSet reduced = s;
      reduced.items.erase(reduced.items.begin() + static_cast<std::ptrdiff_t>(drop));
      if (satisfies_k_shot(reduced, d.n_labels(), k)) {
        ++minimal_fail;
        break;
      }
    }
  }
  std::ostringstream d;
  d << crit1_fail << " K-shot violations in 2000 supports, " << minimal_fail << " non-minimal of " << checked
    << " exhaustively checked";
  return {crit1_fail == 0 && minimal_fail == 0 && checked > 0, d.str()};
}

Outcome synthetic_ablation() {
  std::vector<Domain> domains;
  for (int d = 0; d < 3; ++d) domains.push_back(generate_synthetic(default_synth_spec(d, 8), 7 + d));
  const auto table = toy_embed_corpus(domains, 256, 7);
  bool pass = true;
  std::ostringstream d;
  for (int k : {1, 5}) {
    CrossValidationConfig cfg;
    cfg.k = k;
    cfg.target_episodes = 40;
    cfg.ablation = true;
    cfg.seeds = {1, 2, 3, 4, 5};
    const auto rep = cross_validate(domains, table, lex(), cfg);
    const double ours = rep.mean_f1("Ours", "calibrated");
    const double alr = rep.mean_f1("MPN+ALR", "fixed");
    const double mpn = rep.mean_f1("MPN", "fixed");
    const double acc_cal = rep.mean_label_count_accuracy("Ours", "calibrated");
    const double acc_meta = rep.mean_label_count_accuracy("Ours", "meta_only");
    const bool ok = ours - alr >= kF1Gap && alr - mpn >= kF1Gap && acc_cal - acc_meta >= kCountAccuracyGap;
    pass = pass && ok;
    d.precision(3);
    d << std::fixed << "K=" << k << ": F1 " << 100 * ours << "/" << 100 * alr << "/" << 100 * mpn
      << " count-acc " << 100 * acc_cal << " vs " << 100 * acc_meta << (ok ? "" : " [gap too small]") << "; ";
  }
  return {pass, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const std::vector<std::vector<std::string>> steps = {
      {"gen-synth"}, {"embed-toy"}, {"episodes"}, {"train", "--target", "synth0"}, {"eval", "--target", "synth0"}};
  const std::vector<std::string> common = {"--seed", "3", "--episodes-per-domain", "30", "--target-episodes",
                                           "20", "--epochs", "2", "--kernel-epochs", "3", "--dim", "64"};
  std::vector<fs::path> dirs;
  for (const char* name : {"acceptance_det_a", "acceptance_det_b"}) {
    const auto dir = temp_dir(name);
    for (auto args : steps) {
      args.insert(args.end(), common.begin(), common.end());
      args.insert(args.begin(), {"--workdir", dir.string()});
      std::ostringstream out, err;
      if (cli::run(args, out, err) != 0) return {false, args[2] + " failed: " + err.str()};
    }
    dirs.push_back(dir);
  }
  int differing = 0;
  for (const char* f : {"model.json", "eval_report.json", "eval_report.tsv", "train_report.json"}) {
    const auto a = slurp(dirs[0] / f);
    differing += a.empty() || a != slurp(dirs[1] / f);
  }
  return {differing == 0, std::to_string(differing) + " of 4 artifacts differ between two runs"};
}

Outcome loss_conformance() {
  Rng rng(106);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(12));
    const Vector s = random_scores(rng, n);
    std::vector<int> gold;
    for (int i = 0; i < n; ++i) {
      if (rng.bernoulli(0.3)) gold.push_back(i);
    }
    double oracle = 0.0;
    for (int i = 0; i < n; ++i) {
      const double sig = 1.0 / (1.0 + std::exp(-s[i]));
      oracle += std::find(gold.begin(), gold.end(), i) != gold.end() ? -sig : sig;
    }
    worst = std::max(worst, std::abs(sigmoid_ce_loss(s, gold) - oracle / n));
  }
  int zero_mismatch = 0;
  for (int n = 1; n <= 16; ++n) {
    for (int g = 0; g <= n; ++g) {
      std::vector<int> gs(g);
      for (int i = 0; i < g; ++i) gs[i] = i;
      zero_mismatch += sigmoid_ce_loss(Vector::Zero(n), gs) != static_cast<double>(n - 2 * g) / (2.0 * n);
    }
  }
  std::ostringstream d;
  d << "max |err| " << worst << " (tol " << kLossTol << "), " << zero_mismatch << " zero-score mismatches";
  return {worst <= kLossTol && zero_mismatch == 0, d.str()};
}

}  // namespace

/// Runs every criterion, or only those whose name contains argv[1].
int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  const std::vector<std::tuple<std::string, double, Outcome (*)()>> criteria = {
      {"threshold algebra", 1, threshold_algebra},
      {"kernel regression oracle", 5, kernel_oracle},
      {"gradients", 30, gradients},
      {"ALR separation", 60, alr_separation},
      {"episode construction", 60, episode_construction},
      {"synthetic ablation ordering", 600, synthetic_ablation},
      {"determinism", 300, determinism},
      {"loss conformance", 60, loss_conformance}};
  int failed = 0;
  for (const auto& [name, budget, body] : criteria) {
    if (name.find(filter) == std::string::npos) continue;
    failed += !run_criterion(name, budget, body);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
