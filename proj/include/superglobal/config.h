#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "superglobal/pooling.h"
#include "superglobal/rerank.h"
#include "superglobal/tune.h"

namespace superglobal {

// Keys: p, p_r, p_ms ("inf" accepted), alpha, region_window,
// regional_enabled, scale_gem_enabled. Missing keys keep their defaults.
PoolingConfig pooling_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PoolingConfig& cfg);

// Keys: m_top, k_neighbors, beta, query_expansion_enabled.
RerankParams rerank_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RerankParams& params);

// Keys: parameter (required), start, coarse_step, fine_step, lower, upper,
// symmetric, include_infinity, protocol. Unset keys take the parameter's
// defaults.
TuneSpec tune_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TuneSpec& spec);

struct RunPaths {
  std::optional<std::filesystem::path> features;
  std::optional<std::filesystem::path> whitening;
  std::optional<std::filesystem::path> index;
  std::optional<std::filesystem::path> ground_truth;
  std::optional<std::filesystem::path> output;
};

struct RunConfig {
  PoolingConfig pooling;
  RerankParams rerank;
  RunPaths paths;
  std::optional<unsigned> threads;
};

// {"pooling": {...}, "rerank": {...}, "paths": {"features", "whitening",
//  "index", "ground_truth", "output"}, "threads": n}
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace superglobal
