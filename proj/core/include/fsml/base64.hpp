#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fsml::base64 {

std::string encode(std::span<const std::uint8_t> bytes);

/// Throws DataError on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> decode(std::string_view text);

/// Little-endian f32 packing used by the model file.
std::string encode_f32(std::span<const float> values);
std::vector<float> decode_f32(std::string_view text);

}  // namespace fsml::base64
