#include "superglobal/pooling.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "superglobal/error.h"

namespace superglobal {

namespace {

bool is_integer_power(double p) { return std::isfinite(p) && p == std::floor(p); }

void check_power(double p, const char* name) {
  if (!(p > 0) || !std::isfinite(p)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(name) + " must be finite and > 0");
  }
}

void check_activation(const FeatureMap& m, double p) {
  if (m.post_activation() || is_integer_power(p)) return;
  for (float v : m.values()) {
    if (v < 0) {
      throw Error(ErrorCode::NegativeActivation,
                  "fractional power " + std::to_string(p) +
                      " applied to a negative activation");
    }
  }
}

// (mean of x^p)^(1/p) given the mean of (x/scale)^p. Odd integer powers can
// produce a negative mean; take the real root in that case.
double generalized_root(double scaled_mean, double p, double scale) {
  if (scale == 0) return 0.0;
  if (scaled_mean < 0) return -scale * std::pow(-scaled_mean, 1.0 / p);
  return scale * std::pow(scaled_mean, 1.0 / p);
}

// Index into [0, n) under reflection without repeating the edge sample.
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

void PoolingConfig::validate() const {
  check_power(p, "p");
  check_power(p_r, "p_r");
  if (!(p_ms > 0)) {
    throw Error(ErrorCode::InvalidArgument, "p_ms must be > 0 or infinity");
  }
  if (!(alpha >= 0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must be finite and >= 0");
  }
  if (region_window < 1 || region_window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "region_window must be odd and >= 1, got " +
                    std::to_string(region_window));
  }
}

std::vector<float> gem_pool(const FeatureMap& m, double p) {
  check_power(p, "p");
  check_activation(m, p);
  const std::size_t channels = m.channels();
  const auto values = m.values();

  std::vector<double> scale(channels, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& s = scale[i % channels];
    s = std::max(s, std::abs(static_cast<double>(values[i])));
  }
  std::vector<double> sum(channels, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t c = i % channels;
    if (scale[c] > 0) sum[c] += std::pow(values[i] / scale[c], p);
  }
  std::vector<float> out(channels);
  const double n = static_cast<double>(m.pixels());
  for (std::size_t c = 0; c < channels; ++c) {
    out[c] = static_cast<float>(generalized_root(sum[c] / n, p, scale[c]));
  }
  return out;
}

Descriptor whiten(std::span<const float> v, const WhiteningParams& w) {
  if (v.size() != w.in_dim()) {
    throw Error(ErrorCode::DimMismatch,
                "whitening expects " + std::to_string(w.in_dim()) +
                    " inputs, got " + std::to_string(v.size()));
  }
  std::vector<float> out(w.out_dim());
  for (std::size_t r = 0; r < w.out_dim(); ++r) {
    out[r] = static_cast<float>(dot(w.row(r), v) + w.bias()[r]);
  }
  return Descriptor(std::move(out));
}

FeatureMap regional_lp_map(const FeatureMap& m, double p_r, int window) {
  check_power(p_r, "p_r");
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "window must be odd and >= 1");
  }
  check_activation(m, p_r);
  if (window == 1) {
    return m;
  }
  const std::size_t H = m.height(), W = m.width(), C = m.channels();
  const auto values = m.values();
  const auto radius = static_cast<std::ptrdiff_t>(window / 2);

  std::vector<double> scale(C, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    scale[i % C] = std::max(scale[i % C], std::abs(static_cast<double>(values[i])));
  }
  std::vector<double> powered(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double s = scale[i % C];
    powered[i] = s > 0 ? std::pow(values[i] / s, p_r) : 0.0;
  }

  // The window mean is separable: sum along w, then along h.
  std::vector<double> rows(values.size(), 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      double* dst = &rows[(h * W + w) * C];
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        const std::size_t ww = reflect(static_cast<std::ptrdiff_t>(w) + d, W);
        const double* src = &powered[(h * W + ww) * C];
        for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
      }
    }
  }
  std::vector<double> box(values.size(), 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
      const std::size_t hh = reflect(static_cast<std::ptrdiff_t>(h) + d, H);
      for (std::size_t w = 0; w < W; ++w) {
        double* dst = &box[(h * W + w) * C];
        const double* src = &rows[(hh * W + w) * C];
        for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
      }
    }
  }

  const double area = static_cast<double>(window) * window;
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<float>(generalized_root(box[i] / area, p_r, scale[i % C]));
  }
  return FeatureMap(H, W, C, std::move(out), m.post_activation());
}

Descriptor regional_gem(const FeatureMap& m, const PoolingConfig& cfg,
                        const WhiteningParams& w) {
  if (!cfg.regional_enabled || cfg.region_window == 1) {
    return whiten(gem_pool(m, cfg.p), w);
  }
  const FeatureMap regional = regional_lp_map(m, cfg.p_r, cfg.region_window);
  const auto a = m.values();
  const auto b = regional.values();
  std::vector<float> blended(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) blended[i] = (a[i] + b[i]) * 0.5f;
  const FeatureMap mixed(m.height(), m.width(), m.channels(), std::move(blended),
                         m.post_activation());
  return whiten(gem_pool(mixed, cfg.p), w);
}

Descriptor scale_gem(std::span<const Descriptor> per_scale, double p_ms) {
  if (per_scale.empty()) {
    throw Error(ErrorCode::EmptyScaleSet, "no per-scale descriptors");
  }
  if (!(p_ms > 0)) {
    throw Error(ErrorCode::InvalidArgument, "p_ms must be > 0 or infinity");
  }
  const std::size_t dim = per_scale.front().dim();
  for (const auto& d : per_scale) {
    if (d.dim() != dim) {
      throw Error(ErrorCode::DimMismatch, "per-scale descriptors differ in length");
    }
  }
  if (per_scale.size() == 1) return per_scale.front();

  std::vector<float> lo(dim), hi(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    lo[i] = hi[i] = per_scale.front()[i];
    for (const auto& d : per_scale) {
      lo[i] = std::min(lo[i], d[i]);
      hi[i] = std::max(hi[i], d[i]);
    }
  }
  if (std::isinf(p_ms)) return Descriptor(std::move(hi));

  const double shift =
      std::max(0.0, -static_cast<double>(*std::min_element(lo.begin(), lo.end())));
  const double n = static_cast<double>(per_scale.size());
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double scale = static_cast<double>(hi[i]) + shift;
    double sum = 0.0;
    if (scale > 0) {
      for (const auto& d : per_scale) {
        sum += std::pow((static_cast<double>(d[i]) + shift) / scale, p_ms);
      }
    }
    const double v = generalized_root(sum / n, p_ms, scale) - shift;
    // Generalized means stay within [min, max]; rounding must not escape it.
    out[i] = std::clamp(static_cast<float>(v), lo[i], hi[i]);
  }
  return Descriptor(std::move(out));
}

Descriptor extract_descriptor(std::span<const FeatureMap> scales,
                              const PoolingConfig& cfg,
                              const WhiteningParams& w) {
  cfg.validate();
  if (scales.empty()) throw Error(ErrorCode::EmptyScaleSet, "image has no scales");
  std::vector<Descriptor> per_scale;
  per_scale.reserve(scales.size());
  for (const auto& m : scales) {
    if (m.channels() != scales.front().channels()) {
      throw Error(ErrorCode::DimMismatch, "scales differ in channel count");
    }
    per_scale.push_back(regional_gem(relu_threshold(m, cfg.alpha), cfg, w));
  }
  if (cfg.scale_gem_enabled) {
    return l2_normalize(scale_gem(per_scale, cfg.p_ms));
  }
  const std::size_t dim = per_scale.front().dim();
  std::vector<double> sum(dim, 0.0);
  for (const auto& d : per_scale) {
    for (std::size_t i = 0; i < dim; ++i) sum[i] += d[i];
  }
  std::vector<float> mean(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    mean[i] = static_cast<float>(sum[i] / static_cast<double>(per_scale.size()));
  }
  return l2_normalize(Descriptor(std::move(mean)));
}

}  // namespace superglobal
