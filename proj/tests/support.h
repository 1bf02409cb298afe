#pragma once

// Test-only generators and brute-force oracles. The oracles re-derive every
// quantity from its definition and share no code path with the library
// beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <unordered_set>
#include <vector>

#include "superglobal/tensor.h"

namespace sgtest {

using superglobal::Descriptor;
using superglobal::DescriptorSet;
using superglobal::FeatureMap;

inline FeatureMap random_map(std::mt19937_64& rng, std::size_t h, std::size_t w,
                             std::size_t c, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> data(h * w * c);
  for (auto& v : data) v = u(rng);
  return FeatureMap(h, w, c, std::move(data), lo >= 0);
}

inline std::vector<float> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0;
  for (auto& x : v) {
    x = n(rng);
    sq += x * x;
  }
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / std::sqrt(sq));
  return out;
}

inline double naive_dot(std::span<const float> a, std::span<const float> b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

inline std::vector<double> naive_normalize(std::vector<double> v) {
  long double sq = 0;
  for (double x : v) sq += static_cast<long double>(x) * x;
  const double n = std::sqrt(static_cast<double>(sq));
  for (auto& x : v) x /= n;
  return v;
}

// ( (1/HW) sum m^p )^(1/p) per channel, evaluated literally.
inline std::vector<double> naive_gem(const FeatureMap& m, double p) {
  std::vector<double> out(m.channels());
  for (std::size_t c = 0; c < m.channels(); ++c) {
    long double s = 0;
    for (std::size_t h = 0; h < m.height(); ++h)
      for (std::size_t w = 0; w < m.width(); ++w) s += std::pow((long double)m.at(h, w, c), (long double)p);
    out[c] = static_cast<double>(std::pow(s / (m.height() * m.width()), 1.0L / p));
  }
  return out;
}

// numpy-style 'reflect' padding materialized into a larger grid.
// Walks outward from each edge, bouncing off the boundaries.
inline std::vector<std::size_t> reflect_pad_indices(std::size_t n, std::size_t pad) {
  auto bounce = [n](long start, long dir, std::size_t steps) {
    std::vector<std::size_t> out;
    long idx = start;
    for (std::size_t s = 0; s < steps; ++s) {
      if (n == 1) {
        out.push_back(0);
        continue;
      }
      if (idx + dir < 0 || idx + dir >= static_cast<long>(n)) dir = -dir;
      idx += dir;
      out.push_back(static_cast<std::size_t>(idx));
    }
    return out;
  };
  auto left = bounce(0, -1, pad);
  auto right = bounce(static_cast<long>(n) - 1, +1, pad);
  std::vector<std::size_t> out(left.rbegin(), left.rend());
  for (std::size_t i = 0; i < n; ++i) out.push_back(i);
  out.insert(out.end(), right.begin(), right.end());
  return out;
}

inline std::vector<double> naive_regional_map(const FeatureMap& m, double pr, int window) {
  const std::size_t pad = static_cast<std::size_t>(window / 2);
  const auto hs = reflect_pad_indices(m.height(), pad);
  const auto ws = reflect_pad_indices(m.width(), pad);
  std::vector<double> out(m.size());
  for (std::size_t h = 0; h < m.height(); ++h)
    for (std::size_t w = 0; w < m.width(); ++w)
      for (std::size_t c = 0; c < m.channels(); ++c) {
        long double s = 0;
        for (int dh = 0; dh < window; ++dh)
          for (int dw = 0; dw < window; ++dw)
            s += std::pow((long double)m.at(hs[h + dh], ws[w + dw], c), (long double)pr);
        out[(h * m.width() + w) * m.channels() + c] =
            static_cast<double>(std::pow(s / (window * window), 1.0L / pr));
      }
  return out;
}

struct Neighbor {
  std::size_t row;
  double sim;
};

// Literal reranking: exhaustive neighbor search, weighted average, cosine
// scores, fused sort with ties by original rank.
struct OracleRerank {
  std::vector<std::size_t> order;  // database rows, reranked block only
  std::vector<double> fused;
};

inline OracleRerank naive_rerank(std::span<const float> q, const std::vector<std::vector<float>>& top,
                                 const std::vector<std::size_t>& rows, std::size_t K,
                                 double beta, bool expansion) {
  const std::size_t M = top.size();
  std::vector<std::vector<float>> pool;
  pool.emplace_back(q.begin(), q.end());
  for (const auto& t : top) pool.push_back(t);
  const std::size_t dim = q.size();

  std::vector<std::vector<double>> refined;
  for (std::size_t d = 1; d <= M; ++d) {
    std::vector<Neighbor> nb;
    for (std::size_t j = 0; j < pool.size(); ++j)
      if (j != d) nb.push_back({j, naive_dot(pool[d], pool[j])});
    std::sort(nb.begin(), nb.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.sim != b.sim ? a.sim > b.sim : a.row < b.row;
    });
    std::vector<double> num(pool[d].begin(), pool[d].end());
    double den = 1.0;
    for (std::size_t i = 0; i < K; ++i) {
      const double wgt = std::max(nb[i].sim, 0.0);
      for (std::size_t c = 0; c < dim; ++c) num[c] += wgt * beta * pool[nb[i].row][c];
      den += wgt * beta;
    }
    for (auto& v : num) v /= den;
    refined.push_back(naive_normalize(num));
  }

  std::vector<double> qe(dim, -1e300);
  for (std::size_t i = 0; i < std::min(K, M); ++i)
    for (std::size_t c = 0; c < dim; ++c) qe[c] = std::max(qe[c], refined[i][c]);
  qe = naive_normalize(qe);

  std::vector<double> fused(M);
  for (std::size_t r = 0; r < M; ++r) {
    double s1 = 0, s2 = 0;
    for (std::size_t c = 0; c < dim; ++c) {
      s1 += q[c] * refined[r][c];
      s2 += qe[c] * top[r][c];
    }
    fused[r] = expansion ? (s1 + s2) / 2 : s1;
  }
  std::vector<std::size_t> perm(M);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return fused[a] > fused[b]; });
  OracleRerank out;
  for (auto r : perm) {
    out.order.push_back(rows[r]);
    out.fused.push_back(fused[r]);
  }
  return out;
}

// AP from the precision/recall curve: sum over every rank k of
// (R_k - R_{k-1}) * interp(P), with P_0 = 1 for the trapezoid rule.
inline double naive_ap(const std::vector<std::size_t>& ranked,
                       const std::unordered_set<std::size_t>& pos,
                       const std::unordered_set<std::size_t>& junk, std::size_t truncate,
                       bool trapezoid) {
  std::vector<std::size_t> kept;
  for (auto r : ranked)
    if (!junk.count(r)) kept.push_back(r);
  if (kept.size() > truncate) kept.resize(truncate);
  const double denom = static_cast<double>(std::min(pos.size(), truncate));
  double ap = 0, prev_p = 1, prev_r = 0;
  std::size_t hits = 0;
  for (std::size_t k = 1; k <= kept.size(); ++k) {
    if (pos.count(kept[k - 1])) ++hits;
    const double p = static_cast<double>(hits) / k;
    const double r = static_cast<double>(hits) / denom;
    ap += (r - prev_r) * (trapezoid ? (p + prev_p) / 2 : p);
    prev_p = p;
    prev_r = r;
  }
  return ap;
}

}  // namespace sgtest
