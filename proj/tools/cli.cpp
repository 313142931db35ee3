#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "fsml/corpus.hpp"
#include "fsml/embeddings.hpp"
#include "fsml/episodes.hpp"
#include "fsml/errors.hpp"
#include "fsml/evaluation.hpp"
#include "fsml/lexicons.hpp"
#include "fsml/model_io.hpp"
#include "fsml/rng.hpp"
#include "fsml/training.hpp"

namespace fsml::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

TrainConfig train_config(const Config& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.kernel_epochs = cfg.kernel_epochs;
  tc.batch_size = cfg.batch_size;
  tc.lr_proj = cfg.lr_proj;
  tc.lr_kernel = cfg.lr_kernel;
  tc.r_grid_step = cfg.r_grid_step;
  tc.seed = cfg.seed;
  tc.beta = cfg.effective_beta();
  tc.beta_sweep = cfg.beta_sweep && !cfg.no_alr;
  tc.mlp_layers = cfg.mlp_layers;
  tc.mlp_hidden = cfg.mlp_hidden;
  tc.alpha = cfg.alpha;
  tc.epsilon = cfg.epsilon;
  tc.validate();
  return tc;
}

CrossValidationConfig cv_config(const Config& cfg, bool ablation) {
  CrossValidationConfig cv;
  cv.train = train_config(cfg);
  cv.k = cfg.k_shot;
  cv.source_episodes = cfg.episodes_per_domain;
  cv.target_episodes = cfg.target_episodes;
  cv.query_size = cfg.query_size;
  cv.seeds = cfg.seeds;
  cv.ablation = ablation;
  cv.support.skip_probability = cfg.skip_probability;
  return cv;
}

Lexicons lexicons_for(const Config& cfg) {
  return cfg.lexicons.empty() ? Lexicons::shipped() : Lexicons::load(cfg.resolve(cfg.lexicons));
}

/// Corpus with embeddings bound; keeps the table alive alongside the domains.
struct Workspace {
  std::vector<Domain> domains;
  EmbeddingTable table{1};
  Lexicons lexicons;

  const Domain& domain(const std::string& name) const {
    for (const auto& d : domains) {
      if (d.name == name) return d;
    }
    throw ConfigError("unknown domain '" + name + "'");
  }
};

Workspace open_workspace(const Config& cfg) {
  Workspace ws;
  ws.domains = load_corpus(cfg.resolve(cfg.corpus));
  ws.table = load_embedding_table(cfg.resolve(cfg.embeddings));
  bind_embeddings(ws.table, ws.domains);
  ws.lexicons = lexicons_for(cfg);
  return ws;
}

fs::path split_path(const Config& cfg, const std::string& domain) {
  return cfg.resolve(cfg.episodes_dir) / (domain + ".json");
}

std::vector<Episode> load_domain_split(const Config& cfg, const Domain& domain) {
  return load_split(split_path(cfg, domain.name), domain);
}

fs::path out_path(const Config& cfg, const char* fallback) {
  return cfg.resolve(cfg.out.empty() ? std::string(fallback) : cfg.out);
}

fs::path tsv_sibling(fs::path p) { return p.replace_extension(".tsv"); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string dev_for(const Config& cfg, const Workspace& ws) {
  if (!cfg.dev.empty()) return cfg.dev;
  if (cfg.target.empty()) return {};
  for (std::size_t i = 0; i < ws.domains.size(); ++i) {
    if (ws.domains[i].name == cfg.target) return ws.domains[(i + 1) % ws.domains.size()].name;
  }
  throw ConfigError("unknown target domain '" + cfg.target + "'");
}

ThresholdMode mode_for(const Config& cfg, const ModelParams& model) {
  if (cfg.mode != "fixed") return ThresholdMode::parse(cfg.mode);
  if (cfg.threshold) return ThresholdMode::fixed(*cfg.threshold);
  if (model.fixed_threshold) return ThresholdMode::fixed(*model.fixed_threshold);
  throw ConfigError("mode 'fixed' needs --threshold or a model with a tuned fixed threshold");
}

std::string cv_tsv(const CrossValidationReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "domain\tmodel\tmode\tseed\tepisode_id\tf1\tn_correct_count\n";
  for (const auto& rot : report.rotations) {
    for (const auto& r : rot.reports) {
      for (std::size_t e = 0; e < r.episode_f1.size(); ++e) {
        out << r.domain << '\t' << r.model << '\t' << r.mode << '\t' << r.seed << '\t' << e << '\t'
            << r.episode_f1[e] << '\t' << r.episode_count_correct[e] << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace

fs::path cmd_gen_synth(const Config& cfg) {
  const fs::path dir = cfg.resolve(cfg.corpus);
  for (int d = 0; d < cfg.domains; ++d) {
    SynthSpec spec = default_synth_spec(d, cfg.n_labels, cfg.pool_size);
    spec.p_multi = cfg.p_multi;
    save_domain(generate_synthetic(spec, cfg.seed + static_cast<std::uint64_t>(d)), dir);
  }
  return dir;
}

fs::path cmd_embed_toy(const Config& cfg) {
  const auto domains = load_corpus(cfg.resolve(cfg.corpus));
  const fs::path path = cfg.resolve(cfg.embeddings);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_embedding_table(toy_embed_corpus(domains, cfg.dim, cfg.seed), path);
  return path;
}

fs::path cmd_episodes(const Config& cfg) {
  const auto domains = load_corpus(cfg.resolve(cfg.corpus));
  SupportOptions options;
  options.skip_probability = cfg.skip_probability;
  for (const auto& d : domains) {
    Rng rng = Rng(cfg.seed).fork(hash64(d.name)).fork(static_cast<std::uint64_t>(cfg.k_shot));
    const auto split = build_split(d, cfg.k_shot, cfg.episodes_per_domain, cfg.query_size, rng, options);
    save_split(split, split_path(cfg, d.name));
  }
  return cfg.resolve(cfg.episodes_dir);
}

json cmd_train(const Config& cfg) {
  const auto ws = open_workspace(cfg);
  const std::string dev = dev_for(cfg, ws);
  if (!cfg.target.empty()) ws.domain(cfg.target);

  std::vector<DomainEpisodes> sources;
  json source_names = json::array();
  for (const auto& d : ws.domains) {
    if (d.name == cfg.target || d.name == dev) continue;
    sources.push_back({&d, load_domain_split(cfg, d)});
    source_names.push_back(d.name);
  }
  if (sources.empty()) throw ConfigError("no source domains left after removing target and dev");

  auto result = train_pipeline(sources, ws.table, ws.lexicons, train_config(cfg));
  if (!dev.empty()) {
    const Domain& dev_domain = ws.domain(dev);
    const auto dev_eps = load_domain_split(cfg, dev_domain);
    const PredictContext ctx{dev_domain.label_space, ws.table, ws.lexicons};
    result.model.fixed_threshold = tune_fixed_threshold(dev_eps, result.model, ctx);
    result.report["fixed_threshold"] = *result.model.fixed_threshold;
  }
  result.report["sources"] = source_names;
  result.report["target"] = cfg.target;
  result.report["dev"] = dev;

  save_model(result.model, cfg.resolve(cfg.model));
  write_json_file(result.report, out_path(cfg, "train_report.json"));
  return result.report;
}

json cmd_eval(const Config& cfg) {
  const auto ws = open_workspace(cfg);
  const fs::path out = out_path(cfg, "eval_report.json");
  if (cfg.cross_validate) {
    const auto report = cross_validate(ws.domains, ws.table, ws.lexicons, cv_config(cfg, false));
    json j = report.to_json();
    write_json_file(j, out);
    write_text(tsv_sibling(out), cv_tsv(report));
    return j;
  }
  if (cfg.target.empty()) throw ConfigError("eval needs --target or --cross-validate");
  const Domain& target = ws.domain(cfg.target);
  const auto model = load_model(cfg.resolve(cfg.model));
  const auto split = load_domain_split(cfg, target);
  const PredictContext ctx{target.label_space, ws.table, ws.lexicons};
  auto report = evaluate_split(split, model, mode_for(cfg, model), ctx);
  report.model = model.beta == 0.0 ? "MPN" : "Ours";
  report.seed = cfg.seed;
  json j = report.to_json();
  write_json_file(j, out);
  write_text(tsv_sibling(out), report.to_tsv());
  return j;
}

json cmd_predict(const Config& cfg) {
  if (cfg.query_id.empty()) throw ConfigError("predict needs --query-id");
  if (cfg.target.empty()) throw ConfigError("predict needs --target");
  const auto ws = open_workspace(cfg);
  const Domain& target = ws.domain(cfg.target);
  const auto idx = target.find(cfg.query_id);
  if (!idx) throw DataError("query id '" + cfg.query_id + "' not found in domain " + target.name);
  const auto split = load_domain_split(cfg, target);
  if (cfg.episode_index >= static_cast<int>(split.size())) {
    throw ConfigError("episode_index " + std::to_string(cfg.episode_index) + " out of range (split has " +
                      std::to_string(split.size()) + " episodes)");
  }
  const auto model = load_model(cfg.resolve(cfg.model));
  const PredictContext ctx{target.label_space, ws.table, ws.lexicons};
  const auto& query = target.pool[*idx].utterance;
  const auto p = predict(query, split[static_cast<std::size_t>(cfg.episode_index)].support, model,
                         mode_for(cfg, model), ctx);

  json scores = json::object();
  for (int i = 0; i < target.n_labels(); ++i) scores[target.label_space.name(i)] = p.scores.scores[i];
  json labels = json::array();
  for (int l : p.labels) labels.push_back(target.label_space.name(l));
  json j = {{"query_id", cfg.query_id}, {"domain", target.name}, {"episode_index", cfg.episode_index},
            {"mode", mode_for(cfg, model).name()}, {"scores", scores}, {"t_meta", p.t_meta},
            {"t_est", p.t_est}, {"t", p.t}, {"n_est", p.n_est}, {"labels", labels}};
  write_json_file(j, out_path(cfg, "prediction.json"));
  return j;
}

json cmd_ablate(const Config& cfg) {
  const auto ws = open_workspace(cfg);
  const auto report = cross_validate(ws.domains, ws.table, ws.lexicons, cv_config(cfg, true));

  static const std::pair<const char*, const char*> kRows[] = {
      {"MPN", "fixed"}, {"MMN", "fixed"}, {"MPN+ALR", "fixed"}, {"Ours", "calibrated"}};
  json rows = json::array();
  std::ostringstream tsv;
  tsv.precision(17);
  tsv << "target\tmodel\tmode\tmean_f1\tlabel_count_accuracy\n";
  for (const auto& d : ws.domains) {
    for (const auto& [model, mode] : kRows) {
      double f1 = 0.0, acc = 0.0;
      int n = 0;
      for (const auto& rot : report.rotations) {
        if (rot.target != d.name) continue;
        for (const auto& r : rot.reports) {
          if (r.model == model && r.mode == mode) {
            f1 += r.mean_f1;
            acc += r.label_count_accuracy;
            ++n;
          }
        }
      }
      if (n == 0) continue;
      f1 /= n;
      acc /= n;
      rows.push_back({{"target", d.name}, {"model", model}, {"mode", mode}, {"mean_f1", f1},
                      {"label_count_accuracy", acc}});
      tsv << d.name << '\t' << model << '\t' << mode << '\t' << f1 << '\t' << acc << '\n';
    }
  }
  json j = {{"k", cfg.k_shot}, {"rows", rows}, {"report", report.to_json()}};
  const fs::path out = out_path(cfg, "ablation.json");
  write_json_file(j, out);
  write_text(tsv_sibling(out), tsv.str());
  return j;
}

namespace {

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  for (auto& c : s) {
    if (c == '_') c = '-';
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot multi-label intent detection"};
  app.require_subcommand(1);
  std::string workdir = ".";
  std::string config_file;
  app.add_option("--workdir", workdir, "base directory for relative paths");
  app.add_option("--config", config_file, "JSON config file; flags override its keys");

  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::vector<std::pair<const FieldInfo*, CLI::Option*>> options;
  for (const auto& f : config_fields()) {
    CLI::Option* opt = nullptr;
    if (f.kind == FieldInfo::Kind::kBool) {
      opt = app.add_flag(flag_name(f.key), flags[f.key], f.help);
    } else {
      opt = app.add_option(flag_name(f.key), values[f.key], f.help);
    }
    options.emplace_back(&f, opt);
  }

  static const char* kCommands[][2] = {
      {"gen-synth", "write a synthetic corpus"},
      {"embed-toy", "write deterministic toy embeddings for the corpus"},
      {"episodes", "build one episode split per domain"},
      {"train", "train a model on the source domains"},
      {"eval", "evaluate a model or run cross-validation"},
      {"predict", "predict labels for one query"},
      {"ablate", "MPN / MMN / MPN+ALR / Ours comparison by cross-validation"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : kCommands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    subs[name] = sub;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    Config cfg;
    cfg.workdir = workdir;
    if (!config_file.empty()) {
      json j;
      try {
        j = read_json_file(cfg.resolve(config_file));
      } catch (const DataError& e) {
        throw ConfigError(e.what());
      }
      apply_json_config(cfg, j);
    }
    for (const auto& [field, opt] : options) {
      if (opt->count() == 0) continue;
      if (field->kind == FieldInfo::Kind::kBool) {
        apply_json_value(cfg, field->key, flags[field->key]);
      } else {
        apply_json_value(cfg, field->key, parse_flag_value(*field, values[field->key]));
      }
    }
    cfg.validate();

    if (subs["gen-synth"]->parsed()) {
      out << cmd_gen_synth(cfg).string() << '\n';
    } else if (subs["embed-toy"]->parsed()) {
      out << cmd_embed_toy(cfg).string() << '\n';
    } else if (subs["episodes"]->parsed()) {
      out << cmd_episodes(cfg).string() << '\n';
    } else if (subs["train"]->parsed()) {
      cmd_train(cfg);
      out << cfg.resolve(cfg.model).string() << '\n';
    } else if (subs["eval"]->parsed()) {
      cmd_eval(cfg);
      out << out_path(cfg, "eval_report.json").string() << '\n';
    } else if (subs["predict"]->parsed()) {
      out << cmd_predict(cfg).dump(2) << '\n';
    } else if (subs["ablate"]->parsed()) {
      cmd_ablate(cfg);
      out << out_path(cfg, "ablation.json").string() << '\n';
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const json::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace fsml::cli
