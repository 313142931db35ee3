#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "fsml/model.hpp"

namespace fsml {

/// Model file: JSON with base64 little-endian f32 arrays for proj and the MLP.
nlohmann::json model_to_json(const ModelParams& model);
/// Throws DataError on missing keys or inconsistent shapes.
ModelParams model_from_json(const nlohmann::json& j);

void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

/// Writes `j` with two-space indentation and a trailing newline.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace fsml
