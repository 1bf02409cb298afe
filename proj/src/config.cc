#include "superglobal/config.h"

#include <cmath>

#include "superglobal/error.h"
#include "superglobal/tensor_io.h"

namespace superglobal {

namespace {

void require_object(const nlohmann::json& j, const char* what) {
  if (!j.is_object()) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be a JSON object");
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("key '") + key + "': " + e.what());
  }
}

double power_value(const nlohmann::json& v, const char* key) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "Infinity" || s == "infinity") return kInfinitePower;
    throw Error(ErrorCode::InvalidArgument,
                std::string("key '") + key + "': expected a number or \"inf\"");
  }
  if (!v.is_number()) {
    throw Error(ErrorCode::InvalidArgument, std::string("key '") + key + "' must be a number");
  }
  return v.get<double>();
}

nlohmann::json power_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

PoolingConfig pooling_config_from_json(const nlohmann::json& j) {
  require_object(j, "pooling config");
  PoolingConfig cfg;
  read_key(j, "p", cfg.p);
  read_key(j, "p_r", cfg.p_r);
  if (j.contains("p_ms")) cfg.p_ms = power_value(j.at("p_ms"), "p_ms");
  read_key(j, "alpha", cfg.alpha);
  read_key(j, "region_window", cfg.region_window);
  read_key(j, "regional_enabled", cfg.regional_enabled);
  read_key(j, "scale_gem_enabled", cfg.scale_gem_enabled);
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const PoolingConfig& cfg) {
  return {{"p", cfg.p},
          {"p_r", cfg.p_r},
          {"p_ms", power_json(cfg.p_ms)},
          {"alpha", cfg.alpha},
          {"region_window", cfg.region_window},
          {"regional_enabled", cfg.regional_enabled},
          {"scale_gem_enabled", cfg.scale_gem_enabled}};
}

RerankParams rerank_params_from_json(const nlohmann::json& j) {
  require_object(j, "rerank params");
  RerankParams params;
  read_key(j, "m_top", params.m_top);
  read_key(j, "k_neighbors", params.k_neighbors);
  read_key(j, "beta", params.beta);
  read_key(j, "query_expansion_enabled", params.query_expansion_enabled);
  params.validate();
  return params;
}

nlohmann::json to_json(const RerankParams& params) {
  return {{"m_top", params.m_top},
          {"k_neighbors", params.k_neighbors},
          {"beta", params.beta},
          {"query_expansion_enabled", params.query_expansion_enabled}};
}

TuneSpec tune_spec_from_json(const nlohmann::json& j) {
  require_object(j, "tune spec");
  if (!j.contains("parameter") || !j.at("parameter").is_string()) {
    throw Error(ErrorCode::InvalidArgument, "tune spec needs a 'parameter' string");
  }
  TuneSpec spec = TuneSpec::defaults_for(parse_tune_parameter(j.at("parameter").get<std::string>()));
  read_key(j, "start", spec.start);
  read_key(j, "coarse_step", spec.coarse_step);
  read_key(j, "fine_step", spec.fine_step);
  read_key(j, "lower", spec.lower);
  read_key(j, "upper", spec.upper);
  read_key(j, "symmetric", spec.symmetric);
  read_key(j, "include_infinity", spec.include_infinity);
  if (j.contains("protocol")) {
    std::string protocol;
    read_key(j, "protocol", protocol);
    spec.objective = Protocol::parse(protocol);
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const TuneSpec& spec) {
  return {{"parameter", to_string(spec.parameter)},
          {"start", spec.start},
          {"coarse_step", spec.coarse_step},
          {"fine_step", spec.fine_step},
          {"lower", spec.lower},
          {"upper", spec.upper},
          {"symmetric", spec.symmetric},
          {"include_infinity", spec.include_infinity},
          {"protocol", spec.objective.name()}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  require_object(j, "run config");
  RunConfig cfg;
  if (j.contains("pooling")) cfg.pooling = pooling_config_from_json(j.at("pooling"));
  if (j.contains("rerank")) cfg.rerank = rerank_params_from_json(j.at("rerank"));
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    require_object(p, "paths");
    auto path_key = [&](const char* key, std::optional<std::filesystem::path>& out) {
      if (p.contains(key)) {
        std::string s;
        read_key(p, key, s);
        out = s;
      }
    };
    path_key("features", cfg.paths.features);
    path_key("whitening", cfg.paths.whitening);
    path_key("index", cfg.paths.index);
    path_key("ground_truth", cfg.paths.ground_truth);
    path_key("output", cfg.paths.output);
  }
  if (j.contains("threads")) {
    int threads = 0;
    read_key(j, "threads", threads);
    if (threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be >= 1");
    cfg.threads = static_cast<unsigned>(threads);
  }
  return cfg;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

}  // namespace superglobal
