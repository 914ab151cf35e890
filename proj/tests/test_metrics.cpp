#include <doctest.h>

#include <cmath>
#include <random>

#include "gsmile/error.hpp"
#include "gsmile/metrics.hpp"

using namespace gsmile;
using namespace gsmile::metrics;

namespace {

const std::vector<double> kOneInversion{0.10, 0.80, 0.01, 0.70, 0.50, 0.90};
const std::vector<double> kSeparable{0.10, 0.10, 0.01, 0.70, 0.20, 0.90};
const GroundTruth kMakeRainy{{0, 0, 0, 1, 0, 1}};

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("minmax") {
  CHECK(minmax_normalize(std::vector<double>{2, 4, 3}) == std::vector<double>{0, 1, 0.5});
  CHECK(minmax_normalize(std::vector<double>{3, 3}) == std::vector<double>{0, 0});
  const auto n = minmax_normalize(kSeparable);
  CHECK(n[3] == doctest::Approx(0.69 / 0.89));
  CHECK(n[4] == doctest::Approx(0.19 / 0.89));
}

TEST_CASE("accuracy") {
  const GroundTruth t{{1, 0, 1, 0}};
  CHECK(att_acc(std::vector<double>{1, 0, 1, 0}, t) == 1.0);
  CHECK(att_acc(std::vector<double>{0, 1, 0, 1}, t) == 0.0);
  CHECK(att_acc(kSeparable, kMakeRainy) == 1.0);
  CHECK_THROWS_AS(att_acc(std::vector<double>{1, 0}, t), Error);
}

TEST_CASE("f1") {
  const GroundTruth t{{1, 0, 1, 0}};
  CHECK(att_f1(std::vector<double>{1, 0, 1, 0}, t) == 1.0);
  // Scores all equal normalize to 0: nothing predicted positive.
  CHECK(att_f1(std::vector<double>{0.3, 0.3, 0.3, 0.3}, t) == 0.0);
  // TP=1 (index 0), FP=1 (index 1), FN=1 (index 2).
  CHECK(att_f1(std::vector<double>{1, 1, 0, 0}, t) == 0.5);
}

TEST_CASE("auroc") {
  CHECK(att_auroc(std::vector<double>{0.9, 0.1, 0.5}, GroundTruth{{1, 0, 0}}) == 1.0);
  CHECK(att_auroc(std::vector<double>{0.9, 0.1, 0.5}, GroundTruth{{0, 1, 0}}) == 0.0);
  CHECK(att_auroc(kSeparable, kMakeRainy) == 1.0);
  // The positive 0.70 loses to the negative 0.80, one of 8 pairs.
  CHECK(att_auroc(kOneInversion, kMakeRainy) == 0.875);
  CHECK(att_auroc(std::vector<double>{0.5, 0.5}, GroundTruth{{1, 0}}) == 0.0);
  CHECK(att_auroc(std::vector<double>{0.5, 0.5}, GroundTruth{{1, 0}}, TiePolicy::Half) == 0.5);
  CHECK_THROWS_AS(att_auroc(std::vector<double>{0.5, 0.5}, GroundTruth{{1, 1}}), Error);
  CHECK_THROWS_AS(att_auroc(std::vector<double>{0.5, 0.5}, GroundTruth{{0, 0}}), Error);
}

TEST_CASE("auroc is in range and invariant under monotone maps") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 3 + rng() % 8;
    std::vector<double> s(m);
    for (auto& v : s) v = u(rng);
    GroundTruth t{std::vector<std::uint8_t>(m, 1)};
    t.labels[rng() % m] = 0;
    const double a = att_auroc(s, t);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    std::vector<double> e(m), c(m);
    for (std::size_t i = 0; i < m; ++i) {
      e[i] = std::exp(s[i]);
      c[i] = s[i] * s[i] * s[i] + 4.0;
    }
    CHECK(att_auroc(e, t) == a);
    CHECK(att_auroc(c, t) == a);
  }
}

TEST_CASE("acc and f1 are invariant under positive affine maps") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + rng() % 8;
    std::vector<double> s(m);
    GroundTruth t{std::vector<std::uint8_t>(m)};
    for (std::size_t i = 0; i < m; ++i) {
      s[i] = static_cast<double>(rng() % 64) / 64.0;
      t.labels[i] = rng() % 2;
    }
    std::vector<double> a(m);
    // Dyadic scores with a power-of-two scale keep every step exact.
    for (std::size_t i = 0; i < m; ++i) a[i] = 4.0 * s[i] + 8.0;
    CHECK(att_acc(a, t) == att_acc(s, t));
    CHECK(att_f1(a, t) == att_f1(s, t));
  }
}

TEST_CASE("topk and jaccard") {
  const std::vector<double> c{0.1, -0.9, 0.5, 0.5};
  CHECK(topk_indices(c, 1) == std::vector<std::size_t>{1});
  CHECK(topk_indices(c, 2) == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(topk_indices(c, 5), Error);

  // tokens: could you please make this rainy
  const std::vector<double> make_rainy{0, 0, 0, 1, 0, 1}, make_this{0, 0, 0, 1, 1, 0};
  CHECK(jaccard_topk(make_rainy, make_this, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(jaccard_topk(make_rainy, make_rainy, 2) == 1.0);
  const std::vector<double> first{1, 1, 0, 0}, last{0, 0, 1, 1};
  CHECK(jaccard_topk(first, last, 2) == 0.0);
}

TEST_CASE("jaccard properties") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(6), b(6);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    for (std::size_t k = 1; k <= 6; ++k) {
      CHECK(jaccard_topk(a, a, k) == 1.0);
      CHECK(jaccard_topk(a, b, k) == jaccard_topk(b, a, k));
    }
  }
}

TEST_CASE("consistency") {
  const std::vector<std::vector<double>> same{{0.2, 0.4}, {0.2, 0.4}, {0.2, 0.4}};
  auto s = consistency_stats(same);
  CHECK(s.variance == 0.0);
  CHECK(s.std == 0.0);
  const std::vector<std::vector<double>> two{{0.0}, {2.0}};
  s = consistency_stats(two);
  CHECK(s.variance == 1.0);
  CHECK(s.std == 1.0);
  const std::vector<std::vector<double>> mixed{{1, 0}, {1, 2}};
  CHECK(consistency_stats(mixed).variance == 0.5);
  const std::vector<std::vector<double>> one{{1.0}};
  CHECK_THROWS_AS(consistency_stats(one), Error);
}

TEST_CASE("fidelity perfect predictor") {
  const std::vector<double> y{0.1, 0.5, 0.2, 0.9}, w{1, 0.5, 0.25, 2};
  const auto r = fidelity_report(y, y, w, 2);
  CHECK(r.wmse == 0.0);
  CHECK(r.wmae == 0.0);
  CHECK(r.r2 == 1.0);
  CHECK(r.r2_w == 1.0);
  CHECK(r.r2_w_adj == 1.0);
  CHECK(r.mean_l1 == 0.0);
  CHECK(r.mean_l2 == 0.0);
}

TEST_CASE("fidelity hand evaluation") {
  const std::vector<double> y{0, 1}, yhat{0, 0}, w{1, 1};
  const auto r = fidelity_report(y, yhat, w, 2);
  CHECK(r.wmse == 0.5);
  CHECK(r.wmae == 0.5);
  CHECK(r.mean_l1 == 0.5);
  CHECK(r.mean_l2 == 0.5);
  CHECK(r.r2 == -1.0);

  const std::vector<double> y3{1, 2, 6}, mean3(3, 3.0), w3(3, 1.0);
  CHECK(fidelity_report(y3, mean3, w3, 1).r2 == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("fidelity properties") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t J = 5 + rng() % 10;
    std::vector<double> y(J), yhat(J), w(J), ones(J, 0.7);
    for (std::size_t j = 0; j < J; ++j) {
      y[j] = g(rng);
      yhat[j] = y[j] + 0.3 * g(rng);
      w[j] = u(rng);
    }
    const auto uni = fidelity_report(y, yhat, ones, 2);
    CHECK(uni.r2 == doctest::Approx(uni.r2_w).epsilon(1e-12));
    const auto r = fidelity_report(y, yhat, w, 2);
    if (r.r2_w <= 1.0) CHECK(r.r2_w_adj <= r.r2_w);
  }
}

TEST_CASE("fidelity errors") {
  const std::vector<double> c{1, 1, 1}, w{1, 1, 1}, y{0, 1, 2};
  try {
    fidelity_report(c, y, w, 1);
    FAIL("expected DegenerateVariance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateVariance);
  }
  try {
    fidelity_report(y, y, w, 2);
    FAIL("expected AdjustedUndefined");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AdjustedUndefined);
  }
  CHECK_THROWS_AS(fidelity_report(y, std::vector<double>{0, 1}, w, 1), Error);
  CHECK_THROWS_AS(fidelity_report(std::vector<double>{1}, std::vector<double>{1}, std::vector<double>{1}, 1),
                  Error);
  CHECK_THROWS_AS(fidelity_report(y, y, std::vector<double>{0, 0, 0}, 1), Error);
}

TEST_CASE("fidelity summary downgrades to warnings") {
  const std::vector<double> c{1, 1, 1}, w{1, 1, 1};
  const auto s = fidelity_summary(c, c, w, 1);
  CHECK_FALSE(s.r2);
  CHECK_FALSE(s.r2_w);
  CHECK(s.wmse == 0.0);
  REQUIRE(s.warnings.size() == 1);
  CHECK(s.warnings[0].rfind("DegenerateVariance", 0) == 0);
}

}
