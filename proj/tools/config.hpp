#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fsml::cli {

/// Every setting a command can read. JSON config keys and command-line flags
/// share these names (flags use '-' where keys use '_').
struct Config {
  std::filesystem::path workdir = ".";
  std::string corpus = "corpus";
  std::string embeddings = "embeddings.fsml";
  std::string lexicons;  // empty: shipped lexicons
  std::string episodes_dir = "episodes";
  std::string model = "model.json";
  std::string out;

  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  // gen-synth / embed-toy
  int domains = 3;
  int n_labels = 8;
  int pool_size = 300;
  double p_multi = 0.2;
  int dim = 256;

  // episodes
  int k_shot = 1;
  int query_size = 16;
  int episodes_per_domain = 100;
  int target_episodes = 50;
  double skip_probability = 0.2;

  // training
  int epochs = 10;
  int kernel_epochs = 30;
  int batch_size = 4;
  double lr_proj = 1e-2;
  double lr_kernel = 1e-2;
  double r_grid_step = 0.01;
  double beta = 0.5;
  bool beta_sweep = false;
  bool no_alr = false;
  int mlp_layers = 1;
  int mlp_hidden = 10;
  double alpha = 0.3;
  double epsilon = 1e-6;

  // evaluation / prediction
  std::string mode = "calibrated";
  std::optional<double> threshold;
  std::string target;
  std::string dev;
  bool cross_validate = false;
  std::string query_id;
  int episode_index = 0;

  /// Resolves `p` against workdir unless it is absolute.
  std::filesystem::path resolve(const std::string& p) const;
  double effective_beta() const { return no_alr ? 0.0 : beta; }

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Description of one setting, shared by the JSON loader and the flag parser.
struct FieldInfo {
  std::string key;
  std::string help;
  enum class Kind { kInt, kUInt, kDouble, kBool, kString, kSeedList, kOptionalDouble } kind;
};

const std::vector<FieldInfo>& config_fields();

/// Applies one JSON value to the field named `key`. Throws ConfigError on an
/// unknown key or a type mismatch.
void apply_json_value(Config& cfg, const std::string& key, const nlohmann::json& value);

/// Applies every key of a JSON object; unknown keys are rejected.
void apply_json_config(Config& cfg, const nlohmann::json& j);

/// Converts a command-line string to the JSON value for `key`'s kind.
nlohmann::json parse_flag_value(const FieldInfo& field, const std::string& text);

}  // namespace fsml::cli
