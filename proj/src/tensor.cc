#include "superglobal/tensor.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "superglobal/error.h"

namespace superglobal {

namespace {

void require_finite(std::span<const float> values, const char* what) {
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(what) + " contains a non-finite value");
    }
  }
}

}  // namespace

FeatureMap::FeatureMap(std::size_t height, std::size_t width,
                       std::size_t channels, std::vector<float> data,
                       bool post_activation)
    : height_(height),
      width_(width),
      channels_(channels),
      data_(std::move(data)),
      post_activation_(post_activation) {
  if (height_ == 0 || width_ == 0 || channels_ == 0) {
    throw Error(ErrorCode::DimMismatch, "feature map dimensions must be >= 1");
  }
  if (data_.size() != height_ * width_ * channels_) {
    throw Error(ErrorCode::DimMismatch,
                "feature map holds " + std::to_string(data_.size()) +
                    " values, expected " +
                    std::to_string(height_ * width_ * channels_));
  }
  require_finite(data_, "feature map");
  if (post_activation_ &&
      std::any_of(data_.begin(), data_.end(), [](float v) { return v < 0; })) {
    throw Error(ErrorCode::NegativeActivation,
                "post-activation feature map has a negative value");
  }
}

FeatureMap FeatureMap::filled(std::size_t height, std::size_t width,
                              std::size_t channels, float value) {
  return FeatureMap(height, width, channels,
                    std::vector<float>(height * width * channels, value),
                    value >= 0);
}

Descriptor::Descriptor(std::vector<float> values) : values_(std::move(values)) {
  require_finite(values_, "descriptor");
}

double Descriptor::norm() const { return std::sqrt(dot(values_, values_)); }

DescriptorSet::DescriptorSet(std::size_t rows, std::size_t dim,
                             std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (data_.size() != rows_ * dim_) {
    throw Error(ErrorCode::DimMismatch, "descriptor set holds " +
                                            std::to_string(data_.size()) +
                                            " values, expected " +
                                            std::to_string(rows_ * dim_));
  }
  require_finite(data_, "descriptor set");
}

DescriptorSet::DescriptorSet(std::span<const Descriptor> rows)
    : rows_(rows.size()), dim_(rows.empty() ? 0 : rows.front().dim()) {
  data_.reserve(rows_ * dim_);
  for (const auto& d : rows) {
    if (d.dim() != dim_) {
      throw Error(ErrorCode::DimMismatch,
                  "descriptors of different length in one set");
    }
    data_.insert(data_.end(), d.values().begin(), d.values().end());
  }
}

Descriptor DescriptorSet::descriptor(std::size_t i) const {
  auto r = row(i);
  return Descriptor(std::vector<float>(r.begin(), r.end()));
}

WhiteningParams::WhiteningParams(std::size_t out_dim, std::size_t in_dim,
                                 std::vector<float> matrix,
                                 std::vector<float> bias)
    : out_dim_(out_dim),
      in_dim_(in_dim),
      matrix_(std::move(matrix)),
      bias_(std::move(bias)) {
  if (out_dim_ == 0 || in_dim_ == 0 || matrix_.size() != out_dim_ * in_dim_) {
    throw Error(ErrorCode::DimMismatch, "whitening matrix shape mismatch");
  }
  if (bias_.size() != out_dim_) {
    throw Error(ErrorCode::DimMismatch,
                "whitening bias length " + std::to_string(bias_.size()) +
                    " != matrix rows " + std::to_string(out_dim_));
  }
  require_finite(matrix_, "whitening matrix");
  require_finite(bias_, "whitening bias");
}

WhiteningParams WhiteningParams::identity(std::size_t dim) {
  std::vector<float> m(dim * dim, 0.0f);
  for (std::size_t i = 0; i < dim; ++i) m[i * dim + i] = 1.0f;
  return WhiteningParams(dim, dim, std::move(m), std::vector<float>(dim, 0.0f));
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch, "dot of vectors with length " +
                                            std::to_string(a.size()) + " and " +
                                            std::to_string(b.size()));
  }
  constexpr std::size_t kLanes = 8;
  std::array<double, kLanes> acc{};
  const std::size_t n = a.size();
  const std::size_t body = n - n % kLanes;
  const float* pa = a.data();
  const float* pb = b.data();
  for (std::size_t i = 0; i < body; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) {
      acc[j] += static_cast<double>(pa[i + j]) * static_cast<double>(pb[i + j]);
    }
  }
  for (std::size_t i = body; i < n; ++i) {
    acc[i - body] += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
  }
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) +
         ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

Descriptor l2_normalize(const Descriptor& d) {
  const double n = d.norm();
  if (!(n >= 1e-12)) {
    throw Error(ErrorCode::ZeroVector, "cannot normalize a zero-norm vector");
  }
  std::vector<float> out(d.dim());
  for (std::size_t i = 0; i < d.dim(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(d[i]) / n);
  }
  return Descriptor(std::move(out));
}

FeatureMap relu_threshold(const FeatureMap& m, float alpha) {
  if (!(alpha >= 0.0f) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidArgument, "relu threshold must be >= 0");
  }
  std::vector<float> out(m.values().begin(), m.values().end());
  for (float& v : out) v = std::max(v, alpha);
  return FeatureMap(m.height(), m.width(), m.channels(), std::move(out), true);
}

}  // namespace superglobal
