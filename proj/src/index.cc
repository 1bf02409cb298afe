#include "superglobal/index.h"

#include <algorithm>
#include <unordered_set>

#include "superglobal/error.h"
#include "superglobal/parallel.h"
#include "superglobal/similarity.h"

namespace superglobal {

namespace {

// Strict weak order: higher score first, then lower row.
bool ranks_before(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

}  // namespace

std::vector<std::size_t> RankedList::indices() const {
  std::vector<std::size_t> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.index);
  return out;
}

DescriptorIndex::DescriptorIndex(const DescriptorSet& descriptors,
                                 std::vector<std::string> names)
    : dim_(descriptors.dim()), names_(std::move(names)) {
  if (descriptors.rows() != names_.size()) {
    throw Error(ErrorCode::DimMismatch,
                std::to_string(descriptors.rows()) + " descriptors but " +
                    std::to_string(names_.size()) + " names");
  }
  if (names_.empty() || dim_ == 0) {
    throw Error(ErrorCode::EmptyInput, "index needs at least one descriptor");
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw Error(ErrorCode::DuplicateName, n);
  }
  data_.reserve(descriptors.rows() * dim_);
  for (std::size_t i = 0; i < descriptors.rows(); ++i) {
    const Descriptor unit = l2_normalize(descriptors.descriptor(i));
    data_.insert(data_.end(), unit.values().begin(), unit.values().end());
  }
}

std::size_t DescriptorIndex::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return static_cast<std::size_t>(it - names_.begin());
}

DescriptorIndex build_index(const DescriptorSet& descriptors,
                            std::vector<std::string> names) {
  return DescriptorIndex(descriptors, std::move(names));
}

RankedList knn(const DescriptorIndex& index, const Descriptor& q, std::size_t k,
               unsigned threads) {
  if (q.dim() != index.dim()) {
    throw Error(ErrorCode::DimMismatch,
                "query has " + std::to_string(q.dim()) + " dims, index has " +
                    std::to_string(index.dim()));
  }
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (k > index.size()) {
    throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) +
                                          " exceeds database size " +
                                          std::to_string(index.size()));
  }

  const std::size_t n = index.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  std::vector<std::vector<Hit>> partial(workers);
  parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, unsigned worker) {
    // Bounded best-k heap: the front is the worst kept hit.
    auto& heap = partial[worker];
    heap.reserve(k + 1);
    for (std::size_t i = begin; i < end; ++i) {
      const Hit hit{i, similarity(q.values(), index.row(i))};
      if (heap.size() < k) {
        heap.push_back(hit);
        std::push_heap(heap.begin(), heap.end(), ranks_before);
      } else if (ranks_before(hit, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), ranks_before);
        heap.back() = hit;
        std::push_heap(heap.begin(), heap.end(), ranks_before);
      }
    }
  });

  std::vector<Hit> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end(), ranks_before);
  merged.resize(k);
  return RankedList{"", std::move(merged)};
}

}  // namespace superglobal
