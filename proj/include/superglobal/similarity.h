#pragma once

#include <algorithm>
#include <span>

#include "superglobal/tensor.h"

namespace superglobal {

/// Cosine similarity of two unit vectors, clamped to [-1, 1]. Every score in
/// the library goes through this so equal inputs give bitwise-equal scores.
inline double similarity(std::span<const float> a, std::span<const float> b) {
  return std::clamp(dot(a, b), -1.0, 1.0);
}

}  // namespace superglobal
