#include <doctest.h>

#include <cmath>
#include <random>

#include "gsmile/embed.hpp"
#include "gsmile/error.hpp"
#include "gsmile/transport.hpp"
#include "oracles.hpp"

using namespace gsmile;
using namespace gsmile::transport;
using embed::WeightedPointCloud;

namespace {

WeightedPointCloud random_cloud(std::mt19937_64& rng, std::size_t n, std::size_t d,
                                bool random_weights) {
  std::uniform_real_distribution<double> u(-2.0, 2.0), wdist(0.1, 1.0);
  std::vector<double> coords(n * d), w(n);
  for (auto& c : coords) c = u(rng);
  double total = 0.0;
  for (auto& x : w) total += (x = random_weights ? wdist(rng) : 1.0);
  for (auto& x : w) x /= total;
  return WeightedPointCloud(d, std::move(coords), std::move(w));
}

std::vector<std::vector<double>> rows(const WeightedPointCloud& c) {
  std::vector<std::vector<double>> r;
  for (std::size_t i = 0; i < c.size(); ++i) r.emplace_back(c.point(i).begin(), c.point(i).end());
  return r;
}

WeightedPointCloud line(std::vector<double> xs) {
  return WeightedPointCloud::uniform(1, std::move(xs));
}

}  // namespace

TEST_SUITE("transport") {

TEST_CASE("emd hand cases") {
  const auto a = line({0.0, 1.0, 2.5});
  CHECK(emd(a, a).distance == 0.0);
  CHECK(emd(line({0.0}), line({3.0})).distance == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(emd(line({0.0, 1.0}), line({1.0, 2.0})).distance == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(emd(line({0.0}), line({3.0}), 2).distance == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("emd matches permutation oracle on equal-size uniform clouds") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 6, d = 1 + rng() % 3;
    const auto a = random_cloud(rng, n, d, false), b = random_cloud(rng, n, d, false);
    CHECK(emd(a, b).distance == doctest::Approx(oracle::matching_w1(rows(a), rows(b))).epsilon(1e-9));
  }
}

TEST_CASE("emd matches the 2x2 endpoint oracle with arbitrary weights") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_cloud(rng, 2, 2, true), b = random_cloud(rng, 2, 2, true);
    const auto cost = pairwise_cost_serial(a, b, 1);
    const double wa[2] = {a.weight(0), a.weight(1)}, wb[2] = {b.weight(0), b.weight(1)};
    const double c[4] = {cost[0], cost[1], cost[2], cost[3]};
    CHECK(emd(a, b).distance == doctest::Approx(oracle::transport_2x2(wa, wb, c)).epsilon(1e-10));
  }
}

TEST_CASE("plan is feasible") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_cloud(rng, 1 + rng() % 7, 2, true);
    const auto b = random_cloud(rng, 1 + rng() % 7, 2, true);
    const auto r = emd(a, b);
    const auto& plan = r.plan;
    REQUIRE(plan.rows == a.size());
    REQUIRE(plan.cols == b.size());
    for (std::size_t i = 0; i < plan.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < plan.cols; ++j) {
        CHECK(plan.flow(i, j) >= -1e-12);
        s += plan.flow(i, j);
      }
      CHECK(s == doctest::Approx(a.weight(i)).epsilon(1e-9));
    }
    for (std::size_t j = 0; j < plan.cols; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < plan.rows; ++i) s += plan.flow(i, j);
      CHECK(s == doctest::Approx(b.weight(j)).epsilon(1e-9));
    }
  }
}

TEST_CASE("metric properties on random triples") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng() % 3;
    const auto x = random_cloud(rng, 1 + rng() % 6, d, true);
    const auto y = random_cloud(rng, 1 + rng() % 6, d, true);
    const auto z = random_cloud(rng, 1 + rng() % 6, d, true);
    const double xy = emd(x, y).distance, yx = emd(y, x).distance;
    const double xz = emd(x, z).distance, yz = emd(y, z).distance;
    CHECK(xy >= 0.0);
    CHECK(xy == doctest::Approx(yx).epsilon(1e-9));
    CHECK(xz <= xy + yz + 1e-7);
    CHECK(emd(x, x).distance == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("zero only for equal weighted multisets") {
  // Same multiset, listed differently.
  const WeightedPointCloud a(1, {0.0, 1.0, 1.0}, {0.5, 0.25, 0.25});
  const WeightedPointCloud b(1, {1.0, 0.0}, {0.5, 0.5});
  CHECK(emd(a, b).distance == doctest::Approx(0.0).epsilon(1e-12));
  const WeightedPointCloud c(1, {1.0, 0.0}, {0.6, 0.4});
  CHECK(emd(a, c).distance > 0.05);
}

TEST_CASE("parallel pairwise cost equals serial reference") {
  std::mt19937_64 rng(4);
  const auto a = random_cloud(rng, 120, 16, false), b = random_cloud(rng, 90, 16, false);
  for (int p : {1, 2}) CHECK(pairwise_cost(a, b, p) == pairwise_cost_serial(a, b, p));
}

TEST_CASE("norm order") {
  CHECK_NOTHROW(check_norm_order(1));
  CHECK_NOTHROW(check_norm_order(2));
  CHECK_THROWS_AS(check_norm_order(3), Error);
  CHECK_THROWS_AS(emd(line({0.0}), line({1.0}), 0), Error);
}

TEST_CASE("solve_transport rejects unbalanced or mis-shaped inputs") {
  const std::vector<double> s{0.5, 0.5}, d{0.7, 0.2}, c{0, 1, 1, 0};
  CHECK_THROWS_AS(solve_transport(s, d, c), Error);
  const std::vector<double> ok{0.5, 0.5}, bad_cost{0, 1, 1};
  CHECK_THROWS_AS(solve_transport(s, ok, bad_cost), Error);
  const auto plan = solve_transport(s, ok, c);
  CHECK(plan.cost == doctest::Approx(0.0));
}

TEST_CASE("degenerate instances terminate") {
  // Many equal costs and identical supplies are the classic cycling setup.
  const std::size_t n = 12;
  std::vector<double> s(n, 1.0 / n), cost(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) cost[i * n + (n - 1 - i)] = 0.0;
  const auto plan = solve_transport(s, s, cost);
  CHECK(plan.cost == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("larger clouds agree with the 1-D closed form") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  std::vector<double> xs(150), ys(150);
  for (auto& v : xs) v = g(rng);
  for (auto& v : ys) v = g(rng) + 0.4;
  CHECK(emd(line(xs), line(ys)).distance == doctest::Approx(wasserstein_1d(xs, ys)).epsilon(1e-9));
}

TEST_CASE("wmd") {
  const auto t = embed::parse_embedding_table("2 2\na 1 0\nb 0 1\n");
  const std::vector<std::string> a{"a"}, b{"b"}, ab{"a", "b"};
  CHECK(wmd(ab, ab, t) == 0.0);
  CHECK(wmd(a, b, t) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(wmd(ab, b, t) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
  const std::vector<std::string> upper{"A", "B"};
  CHECK(wmd(upper, ab, t) == 0.0);
}

TEST_CASE("wasserstein_1d") {
  const std::vector<double> x{3.0, 1.0, 2.0}, y{2.0, 3.0, 1.0};
  CHECK(wasserstein_1d(x, y) == 0.0);
  CHECK(wasserstein_1d(std::vector<double>{0.0}, std::vector<double>{1.0}) == 1.0);
  CHECK(wasserstein_1d(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 1.0}) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(wasserstein_1d(std::vector<double>{}, std::vector<double>{1.0}), Error);
}

TEST_CASE("wasserstein_1d against the CDF-area oracle, unequal sizes") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(1 + rng() % 9), y(1 + rng() % 9);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    CHECK(wasserstein_1d(x, y) == doctest::Approx(oracle::cdf_w1(x, y)).epsilon(1e-10));
    CHECK(emd(line(x), line(y)).distance == doctest::Approx(oracle::cdf_w1(x, y)).epsilon(1e-9));
  }
}

TEST_CASE("wasserstein_1d with p = 2 matches emd") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(1 + rng() % 6), y(1 + rng() % 6);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    CHECK(wasserstein_1d(x, y, 2) == doctest::Approx(emd(line(x), line(y), 2).distance).epsilon(1e-9));
  }
}

TEST_CASE("gaussian weight") {
  CHECK(gaussian_weight(0.0, 0.7) == 1.0);
  CHECK(gaussian_weight(0.7, 0.7) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(gaussian_weight(2.0, 1.0) == doctest::Approx(std::exp(-4.0)).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_weight(1.0, 0.0), Error);
  CHECK_THROWS_AS(gaussian_weight(1.0, -1.0), Error);
  double prev = 2.0;
  for (double d = 0.0; d < 3.0; d += 0.1) {
    const double w = gaussian_weight(d, 0.8);
    CHECK(w < prev);
    prev = w;
    CHECK(gaussian_weight(3.5 * d, 3.5 * 0.8) == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("median sigma") {
  CHECK(median_sigma(std::vector<double>{0, 1, 2, 3}) == 2.0);
  CHECK(median_sigma(std::vector<double>{0, 0}) == 1.0);
  CHECK(median_sigma(std::vector<double>{5}) == 5.0);
  CHECK(median_sigma(std::vector<double>{4, 1, 0, 3, 2}) == 2.5);
}

}
