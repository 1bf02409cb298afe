#include "superglobal/rerank.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "superglobal/error.h"
#include "superglobal/parallel.h"
#include "superglobal/similarity.h"

namespace superglobal {

namespace {

#if defined(__AVX__)
constexpr std::size_t kLanes = 8;
#else
constexpr std::size_t kLanes = 4;
#endif
constexpr std::size_t kBlock = 4;
constexpr std::size_t kFlush = 512;
// Rows per tile are chosen so one tile of the pool fits in this many bytes.
constexpr std::size_t kTileBytes = 256 * 1024;

// One native SIMD register of floats; GCC and Clang lower arithmetic on
// this type without intrinsics.
typedef float Lanes __attribute__((vector_size(kLanes * sizeof(float))));

inline Lanes load(const float* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// Dot products of row a against kBlock rows. Float partial sums are
// folded into double every kFlush elements, so the summation order depends
// only on the dimension and every entry is reproducible.
void dot_block(const float* a, const float* const* b, std::size_t dim, double* out) {
  double total[kBlock] = {};
  for (std::size_t start = 0; start < dim; start += kFlush) {
    const std::size_t stop = std::min(dim, start + kFlush);
    Lanes lo[kBlock] = {}, hi[kBlock] = {};
    std::size_t i = start;
    for (; i + 2 * kLanes <= stop; i += 2 * kLanes) {
      const Lanes a0 = load(a + i), a1 = load(a + i + kLanes);
      for (std::size_t r = 0; r < kBlock; ++r) {
        lo[r] += a0 * load(b[r] + i);
        hi[r] += a1 * load(b[r] + i + kLanes);
      }
    }
    for (std::size_t r = 0; r < kBlock; ++r) {
      const Lanes sum = lo[r] + hi[r];
      double s = 0.0;
      for (std::size_t l = 0; l < kLanes; ++l) s += sum[l];
      for (std::size_t t = i; t < stop; ++t) s += static_cast<double>(a[t]) * b[r][t];
      total[r] += s;
    }
  }
  for (std::size_t r = 0; r < kBlock; ++r) out[r] = std::clamp(total[r], -1.0, 1.0);
}

// Symmetric similarity matrix of the pool; the diagonal is never read.
// Work is split into square tiles of rows so each tile pair stays cache
// resident instead of streaming the whole pool once per row.
std::vector<double> pool_gram(const DescriptorSet& pool, unsigned threads) {
  const std::size_t n = pool.rows();
  const std::size_t dim = pool.dim();
  const std::size_t tile =
      std::max<std::size_t>(kBlock, kTileBytes / (dim * sizeof(float)) / kBlock * kBlock);
  const std::size_t tiles = (n + tile - 1) / tile;
  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t ti = 0; ti < tiles; ++ti) {
    for (std::size_t tj = ti; tj < tiles; ++tj) tasks.emplace_back(ti, tj);
  }

  std::vector<double> gram(n * n, 0.0);
  parallel_for(tasks.size(), threads, [&](std::size_t task) {
    const auto [ti, tj] = tasks[task];
    const std::size_t i_end = std::min(n, (ti + 1) * tile);
    const std::size_t j_end = std::min(n, (tj + 1) * tile);
    for (std::size_t i = ti * tile; i < i_end; ++i) {
      const float* a = pool.row(i).data();
      for (std::size_t j = std::max(i + 1, tj * tile); j < j_end; j += kBlock) {
        const float* b[kBlock];
        // Past the tile end, repeat its last row; those results are dropped.
        for (std::size_t r = 0; r < kBlock; ++r) b[r] = pool.row(std::min(j + r, j_end - 1)).data();
        double out[kBlock];
        dot_block(a, b, dim, out);
        for (std::size_t r = 0; r < kBlock && j + r < j_end; ++r) gram[i * n + j + r] = out[r];
      }
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) gram[i * n + j] = gram[j * n + i];
  }
  return gram;
}

}  // namespace

void RerankParams::validate() const {
  if (m_top == 0) throw Error(ErrorCode::InvalidArgument, "m_top must be >= 1");
  if (k_neighbors == 0) {
    throw Error(ErrorCode::InvalidArgument, "k_neighbors must be >= 1");
  }
  if (k_neighbors > m_top + 1) {
    throw Error(ErrorCode::InvalidArgument, "k_neighbors must be <= m_top + 1");
  }
  if (!(beta >= 0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::InvalidArgument, "beta must be finite and >= 0");
  }
}

std::vector<Descriptor> refine_database(const DescriptorSet& pool,
                                        const RerankParams& params,
                                        unsigned threads) {
  const std::size_t n = pool.rows();
  const std::size_t k = params.k_neighbors;
  if (n < k + 1) {
    throw Error(ErrorCode::PoolTooSmall,
                "pool of " + std::to_string(n) + " cannot supply " +
                    std::to_string(k) + " neighbors");
  }
  const std::size_t dim = pool.dim();

  const std::vector<double> gram = pool_gram(pool, threads);

  std::vector<Descriptor> refined(n - 1);
  parallel_for(n - 1, threads, [&](std::size_t item) {
    const std::size_t d = item + 1;
    const double* sims = &gram[d * n];
    std::vector<std::size_t> order;
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != d) order.push_back(j);
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        if (sims[a] != sims[b]) return sims[a] > sims[b];
                        return a < b;
                      });

    const auto gd = pool.row(d);
    std::vector<double> acc(gd.begin(), gd.end());
    double weight_sum = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = order[r];
      const double weight = std::max(sims[j], 0.0) * params.beta;
      if (weight == 0) continue;
      weight_sum += weight;
      const auto gi = pool.row(j);
      for (std::size_t c = 0; c < dim; ++c) acc[c] += weight * gi[c];
    }
    if (weight_sum == 0) {
      refined[item] = Descriptor(std::vector<float>(gd.begin(), gd.end()));
      return;
    }
    double sq = 0.0;
    for (double& v : acc) {
      v /= 1.0 + weight_sum;
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (!(norm >= 1e-12)) {
      throw Error(ErrorCode::ZeroVector, "refined descriptor vanished");
    }
    std::vector<float> out(dim);
    for (std::size_t c = 0; c < dim; ++c) out[c] = static_cast<float>(acc[c] / norm);
    refined[item] = Descriptor(std::move(out));
  });
  return refined;
}

Descriptor expand_query(std::span<const Descriptor> refined_top_k) {
  if (refined_top_k.empty()) {
    throw Error(ErrorCode::EmptyInput, "query expansion needs at least one descriptor");
  }
  std::vector<float> hi(refined_top_k.front().values().begin(),
                        refined_top_k.front().values().end());
  for (const auto& d : refined_top_k) {
    if (d.dim() != hi.size()) {
      throw Error(ErrorCode::DimMismatch, "expansion inputs differ in length");
    }
    for (std::size_t i = 0; i < hi.size(); ++i) hi[i] = std::max(hi[i], d[i]);
  }
  return l2_normalize(Descriptor(std::move(hi)));
}

RankedList RerankedList::to_ranked_list() const {
  RankedList out{query, {}};
  out.hits.reserve(hits.size());
  for (const auto& h : hits) out.hits.push_back(Hit{h.index, h.score});
  return out;
}

RerankedList rerank(const Descriptor& query, const RankedList& initial,
                    const DescriptorIndex& index, const RerankParams& params,
                    unsigned threads) {
  params.validate();
  if (query.dim() != index.dim()) {
    throw Error(ErrorCode::DimMismatch, "query and index dims differ");
  }
  const std::size_t m = std::min(params.m_top, initial.hits.size());
  if (m < std::min(params.m_top, index.size())) {
    throw Error(ErrorCode::InvalidArgument,
                "initial ranking holds " + std::to_string(initial.hits.size()) +
                    " hits, fewer than the " + std::to_string(params.m_top) +
                    " to rerank");
  }
  for (const auto& h : initial.hits) {
    if (h.index >= index.size()) {
      throw Error(ErrorCode::InvalidArgument, "ranked index out of range");
    }
  }

  std::vector<float> packed;
  packed.reserve((m + 1) * index.dim());
  packed.insert(packed.end(), query.values().begin(), query.values().end());
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = index.row(initial.hits[r].index);
    packed.insert(packed.end(), row.begin(), row.end());
  }
  const DescriptorSet pool(m + 1, index.dim(), std::move(packed));
  const std::vector<Descriptor> refined = refine_database(pool, params, threads);

  Descriptor expanded;
  if (params.query_expansion_enabled) {
    const std::size_t k = std::min(params.k_neighbors, m);
    expanded = expand_query(std::span<const Descriptor>(refined).first(k));
  }

  RerankedList out{initial.query, {}, m};
  out.hits.reserve(initial.hits.size());
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t db = initial.hits[r].index;
    const double s1 = similarity(query.values(), refined[r].values());
    double s2 = 0.0;
    double fused = s1;
    if (params.query_expansion_enabled) {
      s2 = similarity(expanded.values(), index.row(db));
      fused = (s1 + s2) / 2;
    }
    out.hits.push_back(RerankedHit{db, fused, s1, s2, r});
  }
  std::stable_sort(out.hits.begin(), out.hits.end(),
                   [](const RerankedHit& a, const RerankedHit& b) {
                     return a.score > b.score;
                   });
  for (std::size_t r = m; r < initial.hits.size(); ++r) {
    const auto& h = initial.hits[r];
    out.hits.push_back(RerankedHit{h.index, h.score, h.score, 0.0, r});
  }
  return out;
}

}  // namespace superglobal
