#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "superglobal/tensor.h"

namespace superglobal {

// On-disk layout (all integers little-endian):
//   "SGT1"            4 bytes magic
//   rank              u8
//   dims[rank]        u32 each, all >= 1
//   dtype             u8, 0x01 = float32
//   payload           4 * prod(dims) bytes, row-major float32
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t rank() const noexcept { return dims.size(); }
};

inline constexpr std::uint8_t kDtypeFloat32 = 0x01;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t);

// rank-3 [H, W, C] <-> FeatureMap; rank-2 [N, C] <-> DescriptorSet.
FeatureMap to_feature_map(const Tensor& t);
Tensor from_feature_map(const FeatureMap& m);
DescriptorSet to_descriptor_set(const Tensor& t);
Tensor from_descriptor_set(const DescriptorSet& s);

// Whitening is stored as one rank-2 tensor [C_g, C_d + 1]: the matrix with
// the bias appended as the last column.
WhiteningParams to_whitening(const Tensor& t);
Tensor from_whitening(const WhiteningParams& w);

// "foo/bar.sgt" -> "foo/bar.names.json"
std::filesystem::path names_sidecar(const std::filesystem::path& tensor_path);
std::vector<std::string> read_names(const std::filesystem::path& path);
void write_names(const std::filesystem::path& path,
                 const std::vector<std::string>& names);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& text);

}  // namespace superglobal
