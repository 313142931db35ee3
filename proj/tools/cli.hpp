#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace fsml::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitOther = 1;

/// Writes one synthetic domain per subdirectory of `corpus`.
std::filesystem::path cmd_gen_synth(const Config& cfg);
/// Toy-embeds every utterance and label name of the corpus.
std::filesystem::path cmd_embed_toy(const Config& cfg);
/// One episode split per domain, `<episodes_dir>/<domain>.json`.
std::filesystem::path cmd_episodes(const Config& cfg);
/// Trains on every domain except `target` and `dev`; writes the model and a
/// training report to `out`.
nlohmann::json cmd_train(const Config& cfg);
/// Evaluates the model on the target split, or runs cross-validation.
nlohmann::json cmd_eval(const Config& cfg);
nlohmann::json cmd_predict(const Config& cfg);
/// Four model rows (MPN, MMN, MPN+ALR, Ours) per target domain.
nlohmann::json cmd_ablate(const Config& cfg);

/// Parses arguments, runs the selected command and maps errors to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace fsml::cli
