#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "superglobal/tensor.h"

namespace superglobal {

struct Hit {
  std::size_t index;  // database row
  double score;       // cosine similarity

  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Ordered retrieval result for one query: scores non-increasing, equal
/// scores ordered by ascending database row.
struct RankedList {
  std::string query;
  std::vector<Hit> hits;

  std::vector<std::size_t> indices() const;
};

/// Exact in-memory descriptor store. Rows are unit-norm and named.
class DescriptorIndex {
 public:
  DescriptorIndex(const DescriptorSet& descriptors,
                  std::vector<std::string> names);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }
  DescriptorSet descriptors() const { return DescriptorSet(size(), dim_, data_); }

  /// Row of `name`, or size() when absent.
  std::size_t find(const std::string& name) const;

 private:
  std::size_t dim_;
  std::vector<std::string> names_;
  std::vector<float> data_;
};

DescriptorIndex build_index(const DescriptorSet& descriptors,
                            std::vector<std::string> names);

/// Top-k rows by dot product with q. The scan is split across `threads`
/// workers; the result is identical for every thread count.
RankedList knn(const DescriptorIndex& index, const Descriptor& q, std::size_t k,
               unsigned threads = 1);

}  // namespace superglobal
