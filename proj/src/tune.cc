#include "superglobal/tune.h"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "superglobal/error.h"

namespace superglobal {

namespace {

// Grid values are snapped so that 2.0 + 0.1 * 6 and 2.6 share one cache slot.
double snap(double v) {
  if (std::isinf(v)) return v;
  return std::round(v * 1e9) / 1e9;
}

class Evaluator {
 public:
  explicit Evaluator(const std::function<double(double)>& fn) : fn_(fn) {}

  double operator()(double value) {
    value = snap(value);
    auto it = cache_.find(value);
    if (it != cache_.end()) return it->second;
    const double score = fn_(value);
    cache_.emplace(value, score);
    trace_.push_back(TracePoint{value, score});
    return score;
  }

  const std::vector<TracePoint>& trace() const { return trace_; }

  // First evaluated point among the maxima.
  const TracePoint& best() const {
    const TracePoint* best = &trace_.front();
    for (const auto& t : trace_) {
      if (t.map > best->map) best = &t;
    }
    return *best;
  }

 private:
  const std::function<double(double)>& fn_;
  std::map<double, double> cache_;
  std::vector<TracePoint> trace_;
};

}  // namespace

TuneParameter parse_tune_parameter(const std::string& name) {
  if (name == "p") return TuneParameter::P;
  if (name == "p_r") return TuneParameter::PR;
  if (name == "p_ms") return TuneParameter::PMS;
  if (name == "alpha") return TuneParameter::Alpha;
  throw Error(ErrorCode::InvalidArgument,
              "unknown tuning parameter '" + name + "' (p, p_r, p_ms, alpha)");
}

std::string to_string(TuneParameter parameter) {
  switch (parameter) {
    case TuneParameter::P: return "p";
    case TuneParameter::PR: return "p_r";
    case TuneParameter::PMS: return "p_ms";
    case TuneParameter::Alpha: return "alpha";
  }
  return "?";
}

TuneSpec TuneSpec::defaults_for(TuneParameter parameter) {
  TuneSpec spec;
  spec.parameter = parameter;
  switch (parameter) {
    case TuneParameter::P:
      spec.start = 3.0;
      break;
    case TuneParameter::PR:
      spec.start = 1.0;
      break;
    case TuneParameter::PMS:
      spec.start = 1.0;
      spec.include_infinity = true;
      break;
    case TuneParameter::Alpha:
      spec.start = 0.0;
      spec.coarse_step = 0.01;
      spec.fine_step = 0.001;
      spec.lower = 0.0;
      spec.upper = 0.1;
      break;
  }
  return spec;
}

void TuneSpec::validate() const {
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
    throw Error(ErrorCode::EmptyBracket, "tuning bounds must be finite with lower < upper");
  }
  if (!(start >= lower && start <= upper)) {
    throw Error(ErrorCode::EmptyBracket, "start value lies outside the bounds");
  }
  if (!(fine_step > 0) || !(coarse_step > 0) || !(fine_step < coarse_step)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 < fine_step < coarse_step");
  }
}

TuneResult tune_parameter(const TuneSpec& spec,
                          const std::function<double(double)>& evaluate_at) {
  spec.validate();
  Evaluator eval(evaluate_at);
  const double tol = spec.fine_step * 1e-6;

  const double start_score = eval(spec.start);
  // Returns true when the very first step already lost to the start point.
  auto walk = [&](double direction) {
    double x = spec.start;
    double prev = start_score;
    for (int steps = 0;; ++steps) {
      const double next = snap(x + direction * spec.coarse_step);
      if (next > spec.upper + tol || next < spec.lower - tol) return steps == 0;
      const double score = eval(next);
      if (score < prev) return steps == 0;
      prev = score;
      x = next;
    }
  };
  const bool lost_immediately = walk(+1.0);
  if (spec.symmetric && lost_immediately) walk(-1.0);

  const double coarse_best = eval.best().value;
  const double lo = std::max(spec.lower, coarse_best - spec.coarse_step);
  const double hi = std::min(spec.upper, coarse_best + spec.coarse_step);
  if (lo > hi) throw Error(ErrorCode::EmptyBracket, "fine bracket is empty");
  for (long i = 0;; ++i) {
    const double x = lo + static_cast<double>(i) * spec.fine_step;
    if (x > hi + tol) break;
    eval(std::min(x, hi));
  }
  eval(hi);

  if (spec.include_infinity) eval(kInfinitePower);

  TuneResult result;
  result.best_value = eval.best().value;
  result.best_map = eval.best().map;
  result.trace = eval.trace();
  return result;
}

PoolingConfig with_parameter(PoolingConfig cfg, TuneParameter parameter, double value) {
  switch (parameter) {
    case TuneParameter::P: cfg.p = value; break;
    case TuneParameter::PR: cfg.p_r = value; break;
    case TuneParameter::PMS: cfg.p_ms = value; break;
    case TuneParameter::Alpha: cfg.alpha = static_cast<float>(value); break;
  }
  return cfg;
}

std::string trace_csv(const TuneResult& result) {
  std::ostringstream out;
  out << "value,mAP\n";
  char buf[96];
  for (const auto& t : result.trace) {
    if (std::isinf(t.value)) {
      std::snprintf(buf, sizeof buf, "inf,%.17g\n", t.map);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t.value, t.map);
    }
    out << buf;
  }
  return out.str();
}

}  // namespace superglobal
