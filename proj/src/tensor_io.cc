#include "superglobal/tensor_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "json.hpp"

#include "superglobal/error.h"

namespace superglobal {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'T', '1'};

std::uint32_t load_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint64_t element_count(const std::vector<std::uint32_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) {
    if (d == 0) throw Error(ErrorCode::DimMismatch, "tensor dim of 0");
    if (n > (std::uint64_t{1} << 40) / d) {
      throw Error(ErrorCode::DimMismatch, "tensor too large");
    }
    n *= d;
  }
  return n;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.dims.empty() || t.dims.size() > 255) {
    throw Error(ErrorCode::DimMismatch, "tensor rank must be in [1, 255]");
  }
  const auto n = element_count(t.dims);
  if (n != t.data.size()) {
    throw Error(ErrorCode::DimMismatch, "tensor data length does not match dims");
  }
  std::vector<std::uint8_t> out;
  out.reserve(4 + 1 + 4 * t.dims.size() + 1 + 4 * n);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) store_u32(out, d);
  out.push_back(kDtypeFloat32);
  for (float v : t.data) store_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "missing SGT1 header");
  }
  const std::size_t rank = bytes[4];
  if (rank == 0) throw Error(ErrorCode::DimMismatch, "tensor rank 0");
  const std::size_t header = 5 + 4 * rank + 1;
  if (bytes.size() < header) {
    throw Error(ErrorCode::TruncatedPayload, "header shorter than rank implies");
  }
  Tensor t;
  t.dims.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    t.dims[i] = load_u32(bytes.data() + 5 + 4 * i);
  }
  const std::uint8_t dtype = bytes[header - 1];
  if (dtype != kDtypeFloat32) {
    throw Error(ErrorCode::UnsupportedDtype,
                "dtype byte " + std::to_string(dtype));
  }
  const auto n = element_count(t.dims);
  const std::size_t payload = bytes.size() - header;
  if (payload < 4 * n) {
    throw Error(ErrorCode::TruncatedPayload,
                "payload has " + std::to_string(payload) + " bytes, expected " +
                    std::to_string(4 * n));
  }
  if (payload > 4 * n) {
    throw Error(ErrorCode::DimMismatch,
                "payload has " + std::to_string(payload - 4 * n) +
                    " trailing bytes");
  }
  t.data.resize(n);
  const std::uint8_t* p = bytes.data() + header;
  for (std::size_t i = 0; i < n; ++i) {
    t.data[i] = std::bit_cast<float>(load_u32(p + 4 * i));
  }
  return t;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::Io, "read failed: " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::Io,
                "cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& text) {
  write_file_atomic(
      path, std::span<const std::uint8_t>(
                reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_tensor(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_atomic(path, encode_tensor(t));
}

FeatureMap to_feature_map(const Tensor& t) {
  if (t.rank() != 3) {
    throw Error(ErrorCode::DimMismatch,
                "feature map needs a rank-3 tensor, got rank " +
                    std::to_string(t.rank()));
  }
  return FeatureMap(t.dims[0], t.dims[1], t.dims[2], t.data);
}

Tensor from_feature_map(const FeatureMap& m) {
  return Tensor{{static_cast<std::uint32_t>(m.height()),
                 static_cast<std::uint32_t>(m.width()),
                 static_cast<std::uint32_t>(m.channels())},
                {m.values().begin(), m.values().end()}};
}

DescriptorSet to_descriptor_set(const Tensor& t) {
  if (t.rank() != 2) {
    throw Error(ErrorCode::DimMismatch,
                "descriptor set needs a rank-2 tensor, got rank " +
                    std::to_string(t.rank()));
  }
  return DescriptorSet(t.dims[0], t.dims[1], t.data);
}

Tensor from_descriptor_set(const DescriptorSet& s) {
  return Tensor{{static_cast<std::uint32_t>(s.rows()),
                 static_cast<std::uint32_t>(s.dim())},
                {s.values().begin(), s.values().end()}};
}

WhiteningParams to_whitening(const Tensor& t) {
  if (t.rank() != 2 || t.dims[1] < 2) {
    throw Error(ErrorCode::DimMismatch,
                "whitening needs a rank-2 tensor [C_g, C_d + 1]");
  }
  const std::size_t rows = t.dims[0];
  const std::size_t in = t.dims[1] - 1;
  std::vector<float> matrix;
  std::vector<float> bias;
  matrix.reserve(rows * in);
  bias.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = t.data.data() + r * (in + 1);
    matrix.insert(matrix.end(), row, row + in);
    bias.push_back(row[in]);
  }
  return WhiteningParams(rows, in, std::move(matrix), std::move(bias));
}

Tensor from_whitening(const WhiteningParams& w) {
  Tensor t{{static_cast<std::uint32_t>(w.out_dim()),
            static_cast<std::uint32_t>(w.in_dim() + 1)},
           {}};
  t.data.reserve(w.out_dim() * (w.in_dim() + 1));
  for (std::size_t r = 0; r < w.out_dim(); ++r) {
    auto row = w.row(r);
    t.data.insert(t.data.end(), row.begin(), row.end());
    t.data.push_back(w.bias()[r]);
  }
  return t;
}

std::filesystem::path names_sidecar(const std::filesystem::path& tensor_path) {
  auto p = tensor_path;
  p.replace_extension(".names.json");
  return p;
}

std::vector<std::string> read_names(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  if (!j.is_array()) {
    throw Error(ErrorCode::InvalidArgument,
                path.string() + ": expected a JSON array of names");
  }
  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  for (const auto& v : j) {
    if (!v.is_string()) {
      throw Error(ErrorCode::InvalidArgument,
                  path.string() + ": name entries must be strings");
    }
    names.push_back(v.get<std::string>());
    if (!seen.insert(names.back()).second) {
      throw Error(ErrorCode::DuplicateName, names.back());
    }
  }
  return names;
}

void write_names(const std::filesystem::path& path,
                 const std::vector<std::string>& names) {
  write_file_atomic(path, nlohmann::json(names).dump(1) + "\n");
}

}  // namespace superglobal
