#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace superglobal {

/// Non-negative (after activation) H x W x C activation tensor for one image
/// at one scale. Storage is row-major in (h, w, c) order.
class FeatureMap {
 public:
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels,
             std::vector<float> data, bool post_activation = false);

  static FeatureMap filled(std::size_t height, std::size_t width,
                           std::size_t channels, float value);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }

  float at(std::size_t h, std::size_t w, std::size_t c) const {
    return data_[(h * width_ + w) * channels_ + c];
  }

  std::span<const float> values() const noexcept { return data_; }

  /// True when every value is known to be >= 0.
  bool post_activation() const noexcept { return post_activation_; }

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<float> data_;
  bool post_activation_;
};

/// A global feature vector.
class Descriptor {
 public:
  Descriptor() = default;
  explicit Descriptor(std::vector<float> values);

  std::size_t dim() const noexcept { return values_.size(); }
  float operator[](std::size_t i) const { return values_[i]; }
  std::span<const float> values() const noexcept { return values_; }

  double norm() const;

  friend bool operator==(const Descriptor&, const Descriptor&) = default;

 private:
  std::vector<float> values_;
};

/// N x C packed matrix of descriptors, one per row.
class DescriptorSet {
 public:
  DescriptorSet() = default;
  DescriptorSet(std::size_t rows, std::size_t dim, std::vector<float> data);
  explicit DescriptorSet(std::span<const Descriptor> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }
  Descriptor descriptor(std::size_t i) const;

  std::span<const float> values() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// Fully-connected whitening layer: out = matrix * in + bias, with matrix
/// stored row-major as out_dim x in_dim.
class WhiteningParams {
 public:
  WhiteningParams(std::size_t out_dim, std::size_t in_dim,
                  std::vector<float> matrix, std::vector<float> bias);

  static WhiteningParams identity(std::size_t dim);

  std::size_t out_dim() const noexcept { return out_dim_; }
  std::size_t in_dim() const noexcept { return in_dim_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(matrix_).subspan(i * in_dim_, in_dim_);
  }
  std::span<const float> bias() const noexcept { return bias_; }

 private:
  std::size_t out_dim_;
  std::size_t in_dim_;
  std::vector<float> matrix_;
  std::vector<float> bias_;
};

// Dot product of two float vectors with 64-bit accumulation. The summation
// order is fixed, so the result does not depend on the caller's threading.
double dot(std::span<const float> a, std::span<const float> b);

Descriptor l2_normalize(const Descriptor& d);

/// Generalized ReLU: out = max(x, alpha). alpha = 0 is the vanilla ReLU.
FeatureMap relu_threshold(const FeatureMap& m, float alpha);

}  // namespace superglobal
