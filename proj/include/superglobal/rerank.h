#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "superglobal/index.h"
#include "superglobal/tensor.h"

namespace superglobal {

struct RerankParams {
  std::size_t m_top = 400;       // size of the reranked block
  std::size_t k_neighbors = 9;   // neighbors used to refine each descriptor
  double beta = 0.15;            // neighbor weight multiplier
  bool query_expansion_enabled = true;

  void validate() const;
};

/// Refines every database descriptor of a reranking pool.
///
/// `pool` row 0 is the query, rows 1..M are the top-M database descriptors in
/// rank order. Each database row d takes its K most similar rows of the pool
/// (itself excluded, query included; ties by lower row) and is replaced by
///
///   normalize( (g_d + sum_i w_i beta g_i) / (1 + sum_i w_i beta) ),
///   w_i = max(g_d . g_i, 0).
///
/// Returns the M refined rows in pool order (without the query).
std::vector<Descriptor> refine_database(const DescriptorSet& pool,
                                        const RerankParams& params,
                                        unsigned threads = 1);

/// Elementwise max over refined descriptors, L2-normalized.
Descriptor expand_query(std::span<const Descriptor> refined_top_k);

struct RerankedHit {
  std::size_t index;          // database row
  double score;               // fused score inside the block, else original
  double s1;                  // g_q . g_dr
  double s2;                  // g_qe . g_d, 0 when expansion is disabled
  std::size_t initial_rank;   // position in the input ranking
};

struct RerankedList {
  std::string query;
  std::vector<RerankedHit> hits;  // reranked block first, untouched tail after
  std::size_t block_size = 0;

  RankedList to_ranked_list() const;
};

/// Reranks the first min(m_top, |initial|) hits of `initial` using only the
/// global descriptors stored in `index`. Hits past the block keep their
/// original order and scores.
RerankedList rerank(const Descriptor& query, const RankedList& initial,
                    const DescriptorIndex& index, const RerankParams& params,
                    unsigned threads = 1);

}  // namespace superglobal
