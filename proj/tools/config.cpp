#include "config.hpp"

#include <charconv>
#include <sstream>

#include "fsml/errors.hpp"
#include "fsml/thresholding.hpp"

namespace fsml::cli {

namespace {

using Kind = FieldInfo::Kind;
using nlohmann::json;

template <class T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + v.dump());
  }
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  return as<int>(v, key);
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return as<double>(v, key);
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::uint64_t as_u64(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

std::filesystem::path Config::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : workdir / path;
}

void Config::validate() const {
  require(domains >= 1, "domains must be >= 1");
  require(n_labels >= 2, "n_labels must be >= 2");
  require(pool_size >= n_labels, "pool_size must be >= n_labels");
  require(p_multi >= 0.0 && p_multi <= 1.0, "p_multi must be in [0, 1]");
  require(dim >= 1, "dim must be >= 1");
  require(k_shot >= 1, "k_shot must be >= 1");
  require(query_size >= 1, "query_size must be >= 1");
  require(episodes_per_domain >= 1, "episodes_per_domain must be >= 1");
  require(target_episodes >= 1, "target_episodes must be >= 1");
  require(skip_probability >= 0.0 && skip_probability < 1.0, "skip_probability must be in [0, 1)");
  require(!seeds.empty(), "seeds must not be empty");
  require(episode_index >= 0, "episode_index must be >= 0");
  require(!corpus.empty() && !embeddings.empty() && !model.empty() && !episodes_dir.empty(),
          "paths must not be empty");
  ThresholdMode::parse(mode, threshold.value_or(0.0));
}

const std::vector<FieldInfo>& config_fields() {
  static const std::vector<FieldInfo> fields = {
      {"corpus", "corpus directory", Kind::kString},
      {"embeddings", "FSML embedding file", Kind::kString},
      {"lexicons", "lexicon directory (default: shipped)", Kind::kString},
      {"episodes_dir", "directory of episode splits", Kind::kString},
      {"model", "model JSON file", Kind::kString},
      {"out", "output artifact path", Kind::kString},
      {"seed", "RNG seed", Kind::kUInt},
      {"seeds", "comma-separated seed list for cross-validation", Kind::kSeedList},
      {"domains", "number of synthetic domains", Kind::kInt},
      {"n_labels", "labels per synthetic domain", Kind::kInt},
      {"pool_size", "utterances per synthetic domain", Kind::kInt},
      {"p_multi", "probability of a multi-label utterance", Kind::kDouble},
      {"dim", "toy embedding dimension", Kind::kInt},
      {"k_shot", "K in K-shot", Kind::kInt},
      {"query_size", "queries per episode", Kind::kInt},
      {"episodes_per_domain", "episodes per source domain", Kind::kInt},
      {"target_episodes", "episodes per target domain", Kind::kInt},
      {"skip_probability", "removal-pass skip probability", Kind::kDouble},
      {"epochs", "scorer epochs", Kind::kInt},
      {"kernel_epochs", "kernel pretraining epochs", Kind::kInt},
      {"batch_size", "episodes per update", Kind::kInt},
      {"lr_proj", "projection learning rate", Kind::kDouble},
      {"lr_kernel", "kernel learning rate", Kind::kDouble},
      {"r_grid_step", "grid step for r", Kind::kDouble},
      {"beta", "anchor weight", Kind::kDouble},
      {"beta_sweep", "select beta from {0.1,...,0.9} on dev", Kind::kBool},
      {"no_alr", "disable anchoring (beta = 0)", Kind::kBool},
      {"mlp_layers", "kernel MLP depth", Kind::kInt},
      {"mlp_hidden", "kernel MLP width", Kind::kInt},
      {"alpha", "meta/estimated threshold mix", Kind::kDouble},
      {"epsilon", "all-label escape margin", Kind::kDouble},
      {"mode", "threshold mode: calibrated, meta_only or fixed", Kind::kString},
      {"threshold", "fixed threshold value", Kind::kOptionalDouble},
      {"target", "target domain", Kind::kString},
      {"dev", "dev domain", Kind::kString},
      {"cross_validate", "evaluate by leave-one-domain-out rotation", Kind::kBool},
      {"query_id", "query utterance id", Kind::kString},
      {"episode_index", "episode of the target split", Kind::kInt},
  };
  return fields;
}

void apply_json_value(Config& c, const std::string& key, const json& v) {
  if (key == "corpus") c.corpus = as_string(v, key);
  else if (key == "embeddings") c.embeddings = as_string(v, key);
  else if (key == "lexicons") c.lexicons = as_string(v, key);
  else if (key == "episodes_dir") c.episodes_dir = as_string(v, key);
  else if (key == "model") c.model = as_string(v, key);
  else if (key == "out") c.out = as_string(v, key);
  else if (key == "seed") c.seed = as_u64(v, key);
  else if (key == "seeds") {
    if (!v.is_array()) throw ConfigError("config key 'seeds' must be an array");
    c.seeds.clear();
    for (const auto& s : v) c.seeds.push_back(as_u64(s, key));
  }
  else if (key == "domains") c.domains = as_int(v, key);
  else if (key == "n_labels") c.n_labels = as_int(v, key);
  else if (key == "pool_size") c.pool_size = as_int(v, key);
  else if (key == "p_multi") c.p_multi = as_double(v, key);
  else if (key == "dim") c.dim = as_int(v, key);
  else if (key == "k_shot") c.k_shot = as_int(v, key);
  else if (key == "query_size") c.query_size = as_int(v, key);
  else if (key == "episodes_per_domain") c.episodes_per_domain = as_int(v, key);
  else if (key == "target_episodes") c.target_episodes = as_int(v, key);
  else if (key == "skip_probability") c.skip_probability = as_double(v, key);
  else if (key == "epochs") c.epochs = as_int(v, key);
  else if (key == "kernel_epochs") c.kernel_epochs = as_int(v, key);
  else if (key == "batch_size") c.batch_size = as_int(v, key);
  else if (key == "lr_proj") c.lr_proj = as_double(v, key);
  else if (key == "lr_kernel") c.lr_kernel = as_double(v, key);
  else if (key == "r_grid_step") c.r_grid_step = as_double(v, key);
  else if (key == "beta") c.beta = as_double(v, key);
  else if (key == "beta_sweep") c.beta_sweep = as_bool(v, key);
  else if (key == "no_alr") c.no_alr = as_bool(v, key);
  else if (key == "mlp_layers") c.mlp_layers = as_int(v, key);
  else if (key == "mlp_hidden") c.mlp_hidden = as_int(v, key);
  else if (key == "alpha") c.alpha = as_double(v, key);
  else if (key == "epsilon") c.epsilon = as_double(v, key);
  else if (key == "mode") c.mode = as_string(v, key);
  else if (key == "threshold") {
    if (v.is_null()) c.threshold.reset();
    else c.threshold = as_double(v, key);
  }
  else if (key == "target") c.target = as_string(v, key);
  else if (key == "dev") c.dev = as_string(v, key);
  else if (key == "cross_validate") c.cross_validate = as_bool(v, key);
  else if (key == "query_id") c.query_id = as_string(v, key);
  else if (key == "episode_index") c.episode_index = as_int(v, key);
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_json_config(Config& cfg, const json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) apply_json_value(cfg, key, value);
}

json parse_flag_value(const FieldInfo& field, const std::string& text) {
  const auto bad = [&] { return ConfigError("invalid value '" + text + "' for --" + field.key); };
  const auto parse_int = [&](const std::string& s) -> std::int64_t {
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) throw bad();
    return v;
  };
  switch (field.kind) {
    case Kind::kInt:
    case Kind::kUInt:
      return parse_int(text);
    case Kind::kDouble:
    case Kind::kOptionalDouble: {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        throw bad();
      }
      if (used != text.size()) throw bad();
      return v;
    }
    case Kind::kBool:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw bad();
    case Kind::kString:
      return text;
    case Kind::kSeedList: {
      json arr = json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) arr.push_back(parse_int(item));
      if (arr.empty()) throw bad();
      return arr;
    }
  }
  throw bad();
}

}  // namespace fsml::cli
