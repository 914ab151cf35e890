#include "gsmile/significance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "gsmile/error.hpp"
#include "gsmile/transport.hpp"

namespace gsmile::significance {
namespace {

std::mt19937_64 block_rng(std::uint64_t seed, std::uint64_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  return std::mt19937_64(seq);
}

void check_common(std::size_t lx, std::size_t ly, std::size_t max_itr, int p) {
  if (lx == 0 || ly == 0) throw Error(ErrorCode::EmptyInput, "bootstrap needs non-empty X and Y");
  if (max_itr == 0) throw Error(ErrorCode::InvalidArgument, "max_itr must be positive");
  transport::check_norm_order(p);
}

// Resampling distance over scalar pools.
class ScalarProblem {
 public:
  ScalarProblem(std::span<const double> X, std::span<const double> Y, int p)
      : lx_(X.size()), ly_(Y.size()), p_(p) {
    pool_.assign(X.begin(), X.end());
    pool_.insert(pool_.end(), Y.begin(), Y.end());
    observed_ = transport::wasserstein_1d(X, Y, p);
  }

  double observed() const { return observed_; }

  std::size_t count_block(std::uint64_t seed, std::uint64_t block, std::size_t iters) const {
    auto rng = block_rng(seed, block);
    std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
    std::vector<double> e(lx_), f(ly_);
    std::size_t bigger = 0;
    for (std::size_t it = 0; it < iters; ++it) {
      for (auto& v : e) v = pool_[pick(rng)];
      for (auto& v : f) v = pool_[pick(rng)];
      if (transport::wasserstein_1d(e, f, p_) >= observed_) ++bigger;
    }
    return bigger;
  }

 private:
  std::size_t lx_, ly_;
  int p_;
  std::vector<double> pool_;
  double observed_ = 0.0;
};

// Resampling distance over vector pools; the pooled ground-cost matrix is
// computed once and each resample solves a transport problem on the
// multiplicity-merged sub-blocks.
class CloudProblem {
 public:
  CloudProblem(const embed::WeightedPointCloud& X, const embed::WeightedPointCloud& Y, int p)
      : lx_(X.size()), ly_(Y.size()), p_(p) {
    if (X.empty() || Y.empty()) throw Error(ErrorCode::EmptyInput, "bootstrap needs non-empty X and Y");
    if (X.dim() != Y.dim())
      throw Error(ErrorCode::MixedSampleKinds, "samples have different dimensions");
    std::vector<double> coords(X.coords().begin(), X.coords().end());
    coords.insert(coords.end(), Y.coords().begin(), Y.coords().end());
    const auto pool = embed::WeightedPointCloud::uniform(X.dim(), std::move(coords));
    n_ = pool.size();
    cost_ = transport::pairwise_cost(pool, pool, p);
    std::vector<std::size_t> xi(lx_), yi(ly_);
    for (std::size_t k = 0; k < lx_; ++k) xi[k] = k;
    for (std::size_t k = 0; k < ly_; ++k) yi[k] = lx_ + k;
    observed_ = distance(xi, yi);
  }

  double observed() const { return observed_; }

  std::size_t count_block(std::uint64_t seed, std::uint64_t block, std::size_t iters) const {
    auto rng = block_rng(seed, block);
    std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
    std::vector<std::size_t> e(lx_), f(ly_);
    std::size_t bigger = 0;
    for (std::size_t it = 0; it < iters; ++it) {
      for (auto& v : e) v = pick(rng);
      for (auto& v : f) v = pick(rng);
      if (distance(e, f) >= observed_) ++bigger;
    }
    return bigger;
  }

 private:
  static void merge(std::vector<std::size_t>& idx, std::vector<double>& mass) {
    const double unit = 1.0 / static_cast<double>(idx.size());
    std::sort(idx.begin(), idx.end());
    std::size_t out = 0;
    mass.clear();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k > 0 && idx[k] == idx[out - 1]) {
        mass.back() += unit;
      } else {
        idx[out++] = idx[k];
        mass.push_back(unit);
      }
    }
    idx.resize(out);
  }

  double distance(std::vector<std::size_t> a, std::vector<std::size_t> b) const {
    std::vector<double> wa, wb;
    merge(a, wa);
    merge(b, wb);
    std::vector<double> sub(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) sub[i * b.size() + j] = cost_[a[i] * n_ + b[j]];
    const double c = transport::solve_transport(wa, wb, sub).cost;
    return p_ == 1 ? c : std::sqrt(c);
  }

  std::size_t lx_, ly_, n_ = 0;
  int p_;
  std::vector<double> cost_;
  double observed_ = 0.0;
};

std::size_t block_count(std::size_t max_itr) { return (max_itr + kBlockSize - 1) / kBlockSize; }
std::size_t block_iters(std::size_t max_itr, std::size_t b) {
  return std::min(kBlockSize, max_itr - b * kBlockSize);
}

template <class Problem>
SignificanceResult run_parallel(const Problem& problem, std::size_t max_itr, std::uint64_t seed) {
  const auto blocks = static_cast<std::int64_t>(block_count(max_itr));
  std::size_t bigger = 0;
  // Distance exceptions cannot cross the OpenMP region; inputs are
  // validated before entering it.
#pragma omp parallel for schedule(dynamic) reduction(+ : bigger)
  for (std::int64_t b = 0; b < blocks; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    bigger += problem.count_block(seed, ub, block_iters(max_itr, ub));
  }
  return {problem.observed(), static_cast<double>(bigger) / static_cast<double>(max_itr), max_itr};
}

template <class Problem>
SignificanceResult run_serial(const Problem& problem, std::size_t max_itr, std::uint64_t seed) {
  std::size_t bigger = 0;
  for (std::size_t b = 0; b < block_count(max_itr); ++b)
    bigger += problem.count_block(seed, b, block_iters(max_itr, b));
  return {problem.observed(), static_cast<double>(bigger) / static_cast<double>(max_itr), max_itr};
}

embed::WeightedPointCloud to_cloud(std::span<const std::vector<double>> samples, std::size_t dim) {
  std::vector<double> coords;
  coords.reserve(samples.size() * dim);
  for (const auto& s : samples) {
    if (s.size() != dim) throw Error(ErrorCode::MixedSampleKinds, "samples mix dimensions");
    coords.insert(coords.end(), s.begin(), s.end());
  }
  return embed::WeightedPointCloud::uniform(dim, std::move(coords));
}

void check_uniform(const embed::WeightedPointCloud& c) {
  const double u = 1.0 / static_cast<double>(c.size());
  for (double w : c.weights())
    if (std::abs(w - u) > 1e-12)
      throw Error(ErrorCode::InvalidArgument, "bootstrap samples must carry uniform weights");
}

}  // namespace

SignificanceResult bootstrap_pvalue(std::span<const double> X, std::span<const double> Y,
                                    std::size_t max_itr, std::uint64_t seed, int p) {
  check_common(X.size(), Y.size(), max_itr, p);
  return run_parallel(ScalarProblem(X, Y, p), max_itr, seed);
}

SignificanceResult bootstrap_pvalue_serial(std::span<const double> X, std::span<const double> Y,
                                           std::size_t max_itr, std::uint64_t seed, int p) {
  check_common(X.size(), Y.size(), max_itr, p);
  return run_serial(ScalarProblem(X, Y, p), max_itr, seed);
}

SignificanceResult bootstrap_pvalue(std::span<const std::vector<double>> X,
                                    std::span<const std::vector<double>> Y, std::size_t max_itr,
                                    std::uint64_t seed, int p) {
  check_common(X.size(), Y.size(), max_itr, p);
  const std::size_t dim = X.front().size();
  if (dim == 0) throw Error(ErrorCode::MixedSampleKinds, "zero-length sample vector");
  return bootstrap_pvalue(to_cloud(X, dim), to_cloud(Y, dim), max_itr, seed, p);
}

SignificanceResult bootstrap_pvalue(const embed::WeightedPointCloud& X,
                                    const embed::WeightedPointCloud& Y, std::size_t max_itr,
                                    std::uint64_t seed, int p) {
  check_common(X.size(), Y.size(), max_itr, p);
  check_uniform(X);
  check_uniform(Y);
  return run_parallel(CloudProblem(X, Y, p), max_itr, seed);
}

SignificanceResult bootstrap_pvalue_serial(const embed::WeightedPointCloud& X,
                                           const embed::WeightedPointCloud& Y,
                                           std::size_t max_itr, std::uint64_t seed, int p) {
  check_common(X.size(), Y.size(), max_itr, p);
  check_uniform(X);
  check_uniform(Y);
  return run_serial(CloudProblem(X, Y, p), max_itr, seed);
}

std::vector<PerturbationRecord> filter_significant(std::span<const PerturbationRecord> records,
                                                   double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
  if (alpha == 1.0) return {records.begin(), records.end()};
  std::vector<PerturbationRecord> kept;
  for (const auto& r : records) {
    if (r.index() == 0) {
      kept.push_back(r);
      continue;
    }
    if (!r.p_value)
      throw Error(ErrorCode::InvalidArgument,
                  "record " + std::to_string(r.index()) + " has no p-value");
    if (*r.p_value <= alpha) kept.push_back(r);
  }
  return kept;
}

}  // namespace gsmile::significance
