#pragma once

#include "dmae/deepnet.hpp"
#include "dmae/dmm.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace dmae {

/// Writes to a sibling temporary file and renames it over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_text(const std::filesystem::path& path);

/// {kind, period?, alpha, clusters, dim, theta (row-major), phi, cov?}.
/// cov holds each Cholesky factor packed row by row over its lower triangle.
nlohmann::json dmm_to_json(const DmmParams& params);
DmmParams dmm_from_json(const nlohmann::json& j);

/// {dims, layers: [{in, out, activation, weight (row-major), bias}]}.
nlohmann::json mlp_to_json(const MlpParams& mlp);
MlpParams mlp_from_json(const nlohmann::json& j);

void save_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace dmae
