#pragma once

#include <limits>
#include <span>
#include <vector>

#include "superglobal/tensor.h"

namespace superglobal {

inline constexpr double kInfinitePower = std::numeric_limits<double>::infinity();

struct PoolingConfig {
  double p = 4.6;                 // GeM power
  double p_r = 2.5;               // regional Lp power
  double p_ms = kInfinitePower;   // multi-scale power; infinity = max pooling
  float alpha = 0.014f;           // ReLU threshold
  int region_window = 3;          // odd side length of the regional window
  bool regional_enabled = true;
  bool scale_gem_enabled = true;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// One image at N scales. Maps may differ in H x W but share C.
using ScaleSet = std::vector<FeatureMap>;

/// Per-channel generalized mean over all H x W positions.
std::vector<float> gem_pool(const FeatureMap& m, double p);

Descriptor whiten(std::span<const float> v, const WhiteningParams& w);

/// Same-shape map whose entries are the generalized mean (power p_r) of the
/// window x window neighborhood, with reflection padding at the borders.
FeatureMap regional_lp_map(const FeatureMap& m, double p_r, int window);

/// GeM over the average of the map and its regional Lp map, then whitening.
/// Falls back to plain whitened GeM when regional pooling is disabled.
Descriptor regional_gem(const FeatureMap& m, const PoolingConfig& cfg,
                        const WhiteningParams& w);

/// Generalized mean across per-scale descriptors. A single shift shared by all
/// scales makes every entry non-negative before the power is applied and is
/// removed afterwards. p_ms = kInfinitePower gives the elementwise max.
Descriptor scale_gem(std::span<const Descriptor> per_scale, double p_ms);

/// Full single-image pipeline: threshold ReLU, Regional-GeM per scale,
/// Scale-GeM (or plain averaging) across scales, L2 normalization.
Descriptor extract_descriptor(std::span<const FeatureMap> scales,
                              const PoolingConfig& cfg,
                              const WhiteningParams& w);

}  // namespace superglobal
