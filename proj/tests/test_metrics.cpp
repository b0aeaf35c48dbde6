#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "fedpredi/error.hpp"
#include "fedpredi/metrics.hpp"
#include "fedpredi/rng.hpp"
#include "oracles.hpp"

using namespace fedpredi;

namespace {

ConfusionMatrix from_pairs(std::size_t classes, const std::vector<std::pair<int, int>>& pairs) {
  ConfusionMatrix cm(classes);
  for (auto [t, p] : pairs) cm.add(t, p);
  return cm;
}

std::vector<std::vector<long>> dense(const ConfusionMatrix& cm, std::size_t classes) {
  std::vector<std::vector<long>> out(classes, std::vector<long>(classes));
  for (std::size_t t = 0; t < classes; ++t)
    for (std::size_t p = 0; p < classes; ++p) out[t][p] = static_cast<long>(cm.at(t, p));
  return out;
}

}  // namespace

TEST_CASE("hand-computed three-class example") {
  // true 0: predicted 0,0,1 ; true 1: predicted 1 ; true 2: predicted 0,0
  const auto cm = from_pairs(3, {{0, 0}, {0, 0}, {0, 1}, {1, 1}, {2, 0}, {2, 0}});
  const auto m = macro_metrics(cm);
  CHECK(m.macro_accuracy == doctest::Approx((2.0 / 3.0 + 1.0 + 0.0) / 3.0));
  // F1: class 0 = 2*2/(4+2+1), class 1 = 2/(2+1), class 2 = 0
  CHECK(m.macro_f1 == doctest::Approx((4.0 / 7.0 + 2.0 / 3.0 + 0.0) / 3.0));
  CHECK(m.per_class[2].precision == 0.0);
}

TEST_CASE("macro scores agree with the reference on random matrices") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t C = 2 + rng.uniform_index(8);
    ConfusionMatrix cm(C);
    const std::size_t n = 1 + rng.uniform_index(200);
    for (std::size_t i = 0; i < n; ++i) {
      const int t = static_cast<int>(rng.uniform_index(C));
      const int p = rng.uniform() < 0.5 ? t : static_cast<int>(rng.uniform_index(C));
      cm.add(t, p);
    }
    const auto ref = oracle::per_class_scores(dense(cm, C));
    const auto m = macro_metrics(cm);
    double recall = 0.0, f1 = 0.0;
    int with_support = 0, active = 0;
    for (std::size_t c = 0; c < C; ++c) {
      CHECK(m.per_class[c].recall == doctest::Approx(ref[c].recall));
      CHECK(m.per_class[c].precision == doctest::Approx(ref[c].precision));
      CHECK(m.per_class[c].f1 == doctest::Approx(ref[c].f1));
      if (cm.row_sum(c)) {
        recall += ref[c].recall;
        ++with_support;
      }
      if (cm.row_sum(c) || cm.col_sum(c)) {
        f1 += ref[c].f1;
        ++active;
      }
    }
    CHECK(m.macro_accuracy == doctest::Approx(recall / with_support));
    CHECK(m.macro_f1 == doctest::Approx(f1 / active));
    CHECK(m.macro_accuracy >= 0.0);
    CHECK(m.macro_accuracy <= 1.0);
    CHECK(m.macro_f1 >= 0.0);
    CHECK(m.macro_f1 <= 1.0);
  }
}

TEST_CASE("relabeling classes leaves macro scores unchanged") {
  Rng rng(6);
  const std::size_t C = 6;
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < 300; ++i) pairs.push_back({int(rng.uniform_index(C)), int(rng.uniform_index(C))});
  std::vector<int> perm(C);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span(perm));
  auto moved = pairs;
  for (auto& [t, p] : moved) {
    t = perm[t];
    p = perm[p];
  }
  const auto a = macro_metrics(from_pairs(C, pairs));
  const auto b = macro_metrics(from_pairs(C, moved));
  CHECK(a.macro_accuracy == doctest::Approx(b.macro_accuracy).epsilon(1e-14));
  CHECK(a.macro_f1 == doctest::Approx(b.macro_f1).epsilon(1e-14));
}

TEST_CASE("perfect and constant predictors") {
  std::vector<std::pair<int, int>> perfect, constant;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 5; ++i) {
      perfect.push_back({c, c});
      constant.push_back({c, 0});
    }
  const auto p = macro_metrics(from_pairs(4, perfect));
  CHECK(p.macro_accuracy == 1.0);
  CHECK(p.macro_f1 == 1.0);
  const auto k = macro_metrics(from_pairs(4, constant));
  CHECK(k.macro_accuracy == doctest::Approx(0.25));
  CHECK(k.macro_f1 == doctest::Approx(2.0 * 5 / (10.0 + 15.0) / 4.0));
}

TEST_CASE("confusion matrix bookkeeping and errors") {
  ConfusionMatrix cm(3);
  cm.add(0, 2);
  cm.add(1, 2);
  CHECK(cm.total() == 2);
  CHECK(cm.col_sum(2) == 2);
  CHECK(cm.row_sum(0) == 1);
  CHECK_THROWS_AS(cm.add(3, 0), Error);
  CHECK_THROWS_AS(cm.add(0, -1), Error);
  CHECK_THROWS_AS(macro_metrics(ConfusionMatrix(3)), Error);
}

TEST_CASE("two classes, second always predicted as the first") {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 2);
  cm.add(1, 0, 2);
  const auto m = macro_metrics(cm);
  CHECK(m.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.per_class[1].f1 == 0.0);
  CHECK(m.macro_f1 == doctest::Approx(1.0 / 3.0));
  CHECK(m.macro_accuracy == 0.5);
}
