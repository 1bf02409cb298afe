#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "superglobal/error.h"
#include "superglobal/index.h"
#include "support.h"

using namespace superglobal;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Internal;
}

std::vector<std::string> numbered(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("img" + std::to_string(i));
  return out;
}

DescriptorSet random_set(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::vector<float> data;
  for (std::size_t i = 0; i < n; ++i) {
    auto v = sgtest::random_unit(rng, dim);
    data.insert(data.end(), v.begin(), v.end());
  }
  return DescriptorSet(n, dim, data);
}

// Full sort of every database row by exact score.
std::vector<Hit> brute_force(const DescriptorIndex& index, const Descriptor& q, std::size_t k) {
  std::vector<Hit> all;
  for (std::size_t i = 0; i < index.size(); ++i) all.push_back({i, sgtest::naive_dot(q.values(), index.row(i))});
  std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
    return a.score != b.score ? a.score > b.score : a.index < b.index;
  });
  all.resize(k);
  return all;
}

}  // namespace

TEST_CASE("build_index") {
  const DescriptorSet basis(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto index = build_index(basis, {"a", "b", "c"});
  CHECK(index.size() == 3);
  CHECK(index.find("b") == 1);
  CHECK(index.find("zzz") == 3);

  CHECK(code_of([&] { build_index(basis, {"a", "a", "c"}); }) == ErrorCode::DuplicateName);
  CHECK(code_of([&] { build_index(basis, {"a", "b"}); }) == ErrorCode::DimMismatch);
  const DescriptorSet with_zero(2, 2, {1, 1, 0, 0});
  CHECK(code_of([&] { build_index(with_zero, {"a", "b"}); }) == ErrorCode::ZeroVector);

  const DescriptorSet raw(2, 2, {3, 4, 0, 10});
  const auto normed = build_index(raw, {"x", "y"});
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(sgtest::naive_dot(normed.row(i), normed.row(i)) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("knn basics") {
  const DescriptorSet basis(2, 2, {1, 0, 0, 1});
  const auto index = build_index(basis, {"e1", "e2"});
  const auto r = knn(index, Descriptor({1, 0}), 2);
  REQUIRE(r.hits.size() == 2);
  CHECK(r.hits[0] == Hit{0, 1.0});
  CHECK(r.hits[1] == Hit{1, 0.0});

  CHECK(code_of([&] { knn(index, Descriptor({1, 0}), 3); }) == ErrorCode::KTooLarge);
  CHECK(code_of([&] { knn(index, Descriptor({1, 0, 0}), 1); }) == ErrorCode::DimMismatch);
}

TEST_CASE("knn self similarity and ties") {
  std::mt19937_64 rng(41);
  const auto set = random_set(rng, 50, 16);
  const auto index = build_index(set, numbered(50));
  for (std::size_t j : {0u, 17u, 49u}) {
    const auto r = knn(index, index.descriptors().descriptor(j), 1);
    CHECK(r.hits[0].index == j);
    CHECK(r.hits[0].score == doctest::Approx(1.0).epsilon(1e-5));
  }

  // Identical rows tie; the lower row ranks first.
  const DescriptorSet dup(3, 2, {0, 1, 1, 0, 1, 0});
  const auto di = build_index(dup, {"a", "b", "c"});
  const auto r = knn(di, Descriptor({1, 0}), 3);
  CHECK(r.indices() == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("knn equals full-sort brute force") {
  std::mt19937_64 rng(43);
  const auto index = build_index(random_set(rng, 200, 32), numbered(200));
  for (int t = 0; t < 10; ++t) {
    const Descriptor q(sgtest::random_unit(rng, 32));
    const auto want = brute_force(index, q, 50);
    const auto got = knn(index, q, 50);
    REQUIRE(got.hits.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(got.hits[i].index == want[i].index);
      CHECK(got.hits[i].score == doctest::Approx(want[i].score).epsilon(1e-9));
    }
  }
}

TEST_CASE("knn is independent of threads and prefix-consistent") {
  std::mt19937_64 rng(47);
  const auto index = build_index(random_set(rng, 333, 24), numbered(333));
  const Descriptor q(sgtest::random_unit(rng, 24));
  const auto full = knn(index, q, 333, 1);
  for (unsigned threads : {2u, 3u, 8u, 64u}) {
    CHECK(knn(index, q, 333, threads).hits == full.hits);
  }
  for (std::size_t k : {1u, 10u, 100u}) {
    const auto part = knn(index, q, k, 4);
    CHECK(std::equal(part.hits.begin(), part.hits.end(), full.hits.begin()));
  }
  for (std::size_t i = 1; i < full.hits.size(); ++i) {
    CHECK(full.hits[i - 1].score >= full.hits[i].score);
  }
}

TEST_CASE("knn ordering does not depend on insertion order") {
  std::mt19937_64 rng(53);
  const auto set = random_set(rng, 40, 8);
  const auto names = numbered(40);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<float> shuffled;
  std::vector<std::string> shuffled_names;
  for (auto p : perm) {
    auto r = set.row(p);
    shuffled.insert(shuffled.end(), r.begin(), r.end());
    shuffled_names.push_back(names[p]);
  }
  const auto a = build_index(set, names);
  const auto b = build_index(DescriptorSet(40, 8, shuffled), shuffled_names);
  const Descriptor q(sgtest::random_unit(rng, 8));
  const auto ra = knn(a, q, 40);
  const auto rb = knn(b, q, 40);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(a.names()[ra.hits[i].index] == b.names()[rb.hits[i].index]);
  }
}
