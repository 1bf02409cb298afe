#include "doctest.h"

#include <cmath>
#include <random>

#include "superglobal/config.h"
#include "superglobal/error.h"
#include "superglobal/tune.h"

using namespace superglobal;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Internal;
}

TuneSpec spec_for(double start, double lower, double upper) {
  TuneSpec spec;
  spec.start = start;
  spec.lower = lower;
  spec.upper = upper;
  return spec;
}

}  // namespace

TEST_CASE("tune finds the optimum of a quadratic") {
  const auto result = tune_parameter(spec_for(2, 0, 20), [](double x) { return -(x - 4.6) * (x - 4.6); });
  CHECK(std::abs(result.best_value - 4.6) <= 0.05);

  double best = -1e300;
  bool seen = false;
  for (const auto& t : result.trace) {
    best = std::max(best, t.map);
    seen |= t.value == result.best_value;
  }
  CHECK(result.best_map == best);
  CHECK(seen);
}

TEST_CASE("tune on a constant objective keeps the start") {
  const auto result = tune_parameter(spec_for(3, 1, 10), [](double) { return 0.5; });
  CHECK(result.best_value == 3.0);
}

TEST_CASE("tune respects the upper bound") {
  const auto result = tune_parameter(spec_for(2, 1, 6.35), [](double x) { return x; });
  CHECK(result.best_value == 6.35);
  for (const auto& t : result.trace) CHECK(t.value <= 6.35);
}

TEST_CASE("tune walks downward when the optimum is below the start") {
  const auto f = [](double x) { return -std::abs(x - 1.73); };
  const auto result = tune_parameter(spec_for(5, 0, 10), f);
  CHECK(std::abs(result.best_value - 1.73) <= 0.1);

  auto one_way = spec_for(5, 0, 10);
  one_way.symmetric = false;
  const auto upward = tune_parameter(one_way, f);
  CHECK(upward.best_value >= 4.0);
}

TEST_CASE("tune with an infinity candidate") {
  auto spec = TuneSpec::defaults_for(TuneParameter::PMS);
  CHECK(spec.include_infinity);
  const auto result = tune_parameter(spec, [](double x) { return std::isinf(x) ? 1.0 : 0.0; });
  CHECK(std::isinf(result.best_value));
  CHECK(trace_csv(result).find("inf,1") != std::string::npos);
}

TEST_CASE("tune property: unimodal tents and quadratics") {
  std::mt19937_64 rng(107);
  std::uniform_real_distribution<double> peak(0.5, 14.5);
  std::uniform_real_distribution<double> slope(0.1, 5.0);
  std::uniform_real_distribution<double> start(0.0, 15.0);
  for (int t = 0; t < 200; ++t) {
    const double x0 = peak(rng);
    const double a = slope(rng), b = slope(rng);
    auto spec = spec_for(std::round(start(rng) * 10) / 10, 0, 15);
    std::function<double(double)> f;
    if (t % 2) {
      f = [=](double x) { return x < x0 ? a * (x - x0) : -b * (x - x0); };
    } else {
      f = [=](double x) { return -a * (x - x0) * (x - x0); };
    }
    const auto result = tune_parameter(spec, f);
    CHECK(std::abs(result.best_value - x0) <= spec.fine_step);
    // O(range / coarse + 2 coarse / fine) evaluations.
    CHECK(result.trace.size() <= 2 * 15 + 21 + 2);
  }
}

TEST_CASE("tune spec validation") {
  CHECK(code_of([] { tune_parameter(spec_for(2, 5, 1), [](double) { return 0.0; }); }) == ErrorCode::EmptyBracket);
  CHECK(code_of([] { tune_parameter(spec_for(7, 0, 5), [](double) { return 0.0; }); }) == ErrorCode::EmptyBracket);
  auto bad = spec_for(1, 0, 5);
  bad.fine_step = 2;
  CHECK(code_of([&] { tune_parameter(bad, [](double) { return 0.0; }); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("with_parameter") {
  const PoolingConfig base;
  CHECK(with_parameter(base, TuneParameter::P, 3.0).p == 3.0);
  CHECK(with_parameter(base, TuneParameter::PR, 1.5).p_r == 1.5);
  CHECK(std::isinf(with_parameter(base, TuneParameter::PMS, kInfinitePower).p_ms));
  CHECK(with_parameter(base, TuneParameter::Alpha, 0.02).alpha == 0.02f);
}

TEST_CASE("config json") {
  const auto cfg = pooling_config_from_json(nlohmann::json::parse(
      R"({"p": 3, "p_ms": "inf", "alpha": 0, "region_window": 5, "scale_gem_enabled": false})"));
  CHECK(cfg.p == 3.0);
  CHECK(std::isinf(cfg.p_ms));
  CHECK(cfg.region_window == 5);
  CHECK(!cfg.scale_gem_enabled);
  CHECK(pooling_config_from_json(to_json(cfg)).p_r == cfg.p_r);
  CHECK(to_json(cfg)["p_ms"] == "inf");
  CHECK(code_of([] { pooling_config_from_json(nlohmann::json::parse(R"({"region_window": 2})")); }) ==
        ErrorCode::InvalidArgument);
  CHECK(code_of([] { pooling_config_from_json(nlohmann::json::parse(R"({"p": "big"})")); }) ==
        ErrorCode::InvalidArgument);

  const auto rr = rerank_params_from_json(nlohmann::json::parse(R"({"m_top": 100, "beta": 0})"));
  CHECK(rr.m_top == 100);
  CHECK(rr.k_neighbors == 9);
  CHECK(rr.beta == 0.0);

  const auto ts = tune_spec_from_json(nlohmann::json::parse(R"({"parameter": "p_r", "upper": 6, "protocol": "hard"})"));
  CHECK(ts.parameter == TuneParameter::PR);
  CHECK(ts.start == 1.0);
  CHECK(ts.objective.kind == ProtocolKind::Hard);
  CHECK(tune_spec_from_json(to_json(ts)).upper == 6.0);

  const auto run = run_config_from_json(nlohmann::json::parse(
      R"({"pooling": {"p": 2}, "rerank": {"k_neighbors": 3}, "paths": {"features": "f"}, "threads": 2})"));
  CHECK(run.pooling.p == 2.0);
  CHECK(run.rerank.k_neighbors == 3);
  CHECK(run.paths.features == std::filesystem::path("f"));
  CHECK(run.threads == 2u);
}
