#pragma once

#include <functional>
#include <string>
#include <vector>

#include "superglobal/eval.h"
#include "superglobal/pooling.h"

namespace superglobal {

enum class TuneParameter { P, PR, PMS, Alpha };

TuneParameter parse_tune_parameter(const std::string& name);
std::string to_string(TuneParameter parameter);

/// Coarse-to-fine grid search over one pooling parameter.
struct TuneSpec {
  TuneParameter parameter = TuneParameter::P;
  double start = 3.0;
  double coarse_step = 1.0;
  double fine_step = 0.1;
  double lower = 1.0;
  double upper = 20.0;
  // Also walk downwards from `start` when the first upward step loses.
  bool symmetric = true;
  // Score an extra "infinity" candidate (max pooling); used for p_ms.
  bool include_infinity = false;
  Protocol objective = Protocol::medium();

  static TuneSpec defaults_for(TuneParameter parameter);
  void validate() const;
};

struct TracePoint {
  double value;
  double map;
};

struct TuneResult {
  double best_value = 0.0;
  double best_map = 0.0;
  std::vector<TracePoint> trace;  // every distinct evaluated point, in order
};

/// Phase 1 walks from `start` in coarse steps until the objective drops.
/// Phase 2 scans fine steps over [best - coarse, best + coarse] clipped to the
/// bounds. The argmax over everything evaluated is returned; among equal
/// scores the earliest evaluated point wins.
TuneResult tune_parameter(const TuneSpec& spec,
                          const std::function<double(double)>& evaluate_at);

/// Copy of `cfg` with `parameter` set to `value`.
PoolingConfig with_parameter(PoolingConfig cfg, TuneParameter parameter, double value);

std::string trace_csv(const TuneResult& result);

}  // namespace superglobal
