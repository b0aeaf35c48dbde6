#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "fedpredi/corpus.hpp"
#include "fedpredi/error.hpp"
#include "fedpredi/manifest_io.hpp"
#include "oracles.hpp"

using namespace fedpredi;

namespace {

CorpusManifest make_manifest(const std::vector<std::size_t>& counts, std::size_t dim = 2) {
  CorpusManifest m;
  m.feature_dim = dim;
  m.provenance = "test";
  std::size_t id = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    m.class_names.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < counts[c]; ++i) {
      Example e;
      e.id = "e" + std::to_string(id++);
      e.class_id = static_cast<int>(c);
      e.features.assign(dim, static_cast<double>(id));
      m.examples.push_back(std::move(e));
    }
  }
  return m;
}

std::set<std::string> ids_of(const CorpusManifest& m) {
  std::set<std::string> s;
  for (const auto& e : m.examples) s.insert(e.id);
  return s;
}

}  // namespace

TEST_CASE("filter_min_count keeps qualifying classes and re-indexes densely") {
  auto m = make_manifest({400, 300});
  auto r = filter_min_count(m, 350);
  CHECK(r.kept.class_count() == 1);
  CHECK(r.kept.size() == 400);
  CHECK(r.kept.class_names[0] == "c0");
  CHECK(r.old_to_new == std::vector<int>{0, kUnlabeled});
  CHECK(r.remainder.size() == 300);

  auto skip_first = filter_min_count(make_manifest({5, 20, 30}), 10);
  CHECK(skip_first.old_to_new == std::vector<int>{kUnlabeled, 0, 1});
  for (const auto& e : skip_first.kept.examples) CHECK(e.class_id >= 0);
  CHECK(skip_first.kept.class_counts() == std::vector<std::size_t>{20, 30});
}

TEST_CASE("filter_min_count with threshold 1 is the identity") {
  auto m = make_manifest({3, 4, 5});
  auto r = filter_min_count(m, 1);
  CHECK(r.kept == m);
  CHECK(r.old_to_new == std::vector<int>{0, 1, 2});
  CHECK(r.remainder.examples.empty());
}

TEST_CASE("filter_min_count errors") {
  CHECK_THROWS_AS(filter_min_count(make_manifest({3, 4}), 10), Error);
  CHECK_THROWS_AS(filter_min_count(make_manifest({3, 4}), 0), Error);
}

TEST_CASE("train_test_split boundary arithmetic") {
  auto s = train_test_split(make_manifest({10}), 0.2, 1);
  CHECK(s.train.size() == 8);
  CHECK(s.test.size() == 2);

  auto pair = train_test_split(make_manifest({2}), 0.5, 1);
  CHECK(pair.train.size() == 1);
  CHECK(pair.test.size() == 1);

  // Rounding repair keeps one example on each side.
  auto tiny = train_test_split(make_manifest({3}), 0.05, 1);
  CHECK(tiny.test.size() == 1);
  auto big = train_test_split(make_manifest({3}), 0.95, 1);
  CHECK(big.train.size() == 1);

  CHECK_THROWS_AS(train_test_split(make_manifest({1, 5}), 0.2, 1), Error);
  CHECK_THROWS_AS(train_test_split(make_manifest({4}), 1.0, 1), Error);
}

TEST_CASE("stratified split matches an independent recount over 36 classes") {
  std::vector<std::size_t> counts;
  for (std::size_t c = 0; c < 36; ++c) counts.push_back(2 + (c * 37) % 91);
  auto m = make_manifest(counts);
  auto s = train_test_split(m, 0.2, 99);

  // Recount from the emitted manifests.
  std::map<int, std::size_t> train_n, test_n;
  for (const auto& e : s.train.examples) ++train_n[e.class_id];
  for (const auto& e : s.test.examples) ++test_n[e.class_id];
  for (std::size_t c = 0; c < 36; ++c) {
    const std::size_t n = counts[c];
    std::size_t expect = static_cast<std::size_t>(0.2 * n + 0.5);
    expect = std::min(std::max<std::size_t>(expect, 1), n - 1);
    CHECK(test_n[static_cast<int>(c)] == expect);
    CHECK(train_n[static_cast<int>(c)] + test_n[static_cast<int>(c)] == n);
  }
  auto a = ids_of(s.train), b = ids_of(s.test);
  std::vector<std::string> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  CHECK(both.empty());
  CHECK(a.size() + b.size() == m.size());
}

TEST_CASE("split is deterministic under its seed") {
  auto m = make_manifest({20, 30});
  CHECK(train_test_split(m, 0.2, 5).test == train_test_split(m, 0.2, 5).test);
  CHECK(!(train_test_split(m, 0.2, 5).test == train_test_split(m, 0.2, 6).test));
}

TEST_CASE("build_unlabeled_pool erases labels and conserves cardinality") {
  auto train = make_manifest({4, 4});
  auto rem = make_manifest({3});
  for (auto& e : rem.examples) e.id = "r" + e.id;
  auto pool = build_unlabeled_pool(train, rem);
  CHECK(pool.size() == 11);
  for (const auto& e : pool.examples) CHECK(e.class_id == kUnlabeled);

  CorpusManifest empty = train;
  empty.examples.clear();
  auto same = build_unlabeled_pool(train, empty);
  CHECK(same.size() == train.size());
  CHECK(ids_of(same) == ids_of(train));

  CHECK_THROWS_AS(build_unlabeled_pool(train, train), Error);
}

TEST_CASE("labeled subsets are exact per class and pairwise disjoint") {
  auto m = make_manifest({10, 10});
  auto subsets = sample_labeled_subsets(m, 2, 3, 7);
  REQUIRE(subsets.size() == 2);
  for (const auto& s : subsets) {
    CHECK(s.size() == 6);
    CHECK(s.class_counts() == std::vector<std::size_t>{3, 3});
  }
  auto a = ids_of(subsets[0]), b = ids_of(subsets[1]);
  for (const auto& id : a) CHECK(!b.count(id));

  auto one = sample_labeled_subsets(m, 1, 3, 7);
  CHECK(one.size() == 1);
  CHECK(one[0].class_counts() == std::vector<std::size_t>{3, 3});

  CHECK_THROWS_AS(sample_labeled_subsets(m, 4, 3, 7), Error);
}

TEST_CASE("composition conserves examples for many seeds") {
  std::vector<std::size_t> counts{40, 35, 50, 3, 2, 60};
  auto all = make_manifest(counts);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto f = filter_min_count(all, 30);
    auto s = train_test_split(f.kept, 0.2, seed);
    auto pool = build_unlabeled_pool(s.train, f.remainder);
    CHECK(all.size() == s.train.size() + s.test.size() + f.remainder.size());
    CHECK(pool.size() == s.train.size() + f.remainder.size());
    for (std::size_t c = 0; c < f.kept.class_count(); ++c) {
      const double n = static_cast<double>(f.kept.class_counts()[c]);
      const double frac = static_cast<double>(s.test.class_counts()[c]) / n;
      CHECK(std::abs(frac - 0.2) <= 0.5 / n + 1e-12);
    }
  }
}

TEST_CASE("synthetic corpus is reproducible byte for byte") {
  SyntheticSpec spec;
  spec.class_counts.assign(4, 100);
  spec.feature_dim = 8;
  spec.seed = 3;
  auto a = generate_synthetic(spec);
  auto b = generate_synthetic(spec);
  CHECK(a.manifest.size() == 400);
  std::ostringstream sa, sb;
  write_manifest(sa, a.manifest);
  write_manifest(sb, b.manifest);
  CHECK(sa.str() == sb.str());
  CHECK(a.separability == b.separability);
}

TEST_CASE("noise-free synthetic corpus is perfectly separable") {
  SyntheticSpec spec;
  spec.class_counts.assign(6, 20);
  spec.feature_dim = 4;
  spec.noise = 0.0;
  spec.seed = 1;
  auto s = generate_synthetic(spec);
  CHECK(nearest_mean_accuracy(s.manifest) == 1.0);
  CHECK(s.separability == 1.0);
}

TEST_CASE("nearest-mean accuracy matches an independent generator and classifier") {
  SyntheticSpec spec;
  spec.class_counts = {50, 70, 40, 60, 55};
  spec.feature_dim = 6;
  spec.separation = 1.0;
  spec.noise = 1.2;
  spec.seed = 17;
  auto s = generate_synthetic(spec);
  const auto xs = oracle::regenerate_features(spec);
  REQUIRE(xs.size() == s.manifest.size());
  std::vector<int> ys;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(xs[i] == s.manifest.examples[i].features);
    ys.push_back(s.manifest.examples[i].class_id);
  }
  const double expected = oracle::nearest_centroid_accuracy(xs, ys, 5);
  CHECK(nearest_mean_accuracy(s.manifest) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(expected > 0.3);
  CHECK(expected < 1.0);
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
  spec.class_counts = {3, 0};
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
  spec.class_counts = {3, 3};
  spec.noise = -1.0;
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
}

TEST_CASE("manifest validation catches broken invariants") {
  auto m = make_manifest({2, 2});
  m.examples[1].id = m.examples[0].id;
  CHECK_THROWS_AS(m.validate(), Error);
  m = make_manifest({2, 2});
  m.examples[0].class_id = 5;
  CHECK_THROWS_AS(m.validate(), Error);
  m = make_manifest({2, 2});
  m.examples[0].features.push_back(1.0);
  CHECK_THROWS_AS(m.validate(), Error);
}
