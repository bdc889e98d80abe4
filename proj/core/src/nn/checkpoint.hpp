#pragma once

#include "ssr/nn/params.hpp"
#include "ssr/nn/transformer.hpp"

#include "json.hpp"

#include <filesystem>

namespace ssr::nn::detail {

nlohmann::json config_to_json(const TransformerConfig& cfg);
TransformerConfig config_from_json(const nlohmann::json& j);

// {"name", "shape": [rows, cols], "trainable", "data": row-major values}
nlohmann::json store_to_json(const ParamStore& store);
ParamStore store_from_json(const nlohmann::json& j);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace ssr::nn::detail
