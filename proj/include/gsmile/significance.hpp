#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gsmile/embed.hpp"
#include "gsmile/record.hpp"

namespace gsmile::significance {

struct SignificanceResult {
  double observed = 0.0;
  double p_value = 0.0;
  std::size_t iterations = 0;

  bool operator==(const SignificanceResult&) const = default;
};

inline constexpr std::size_t kDefaultMaxIterations = 10'000;
// Iterations per independently seeded substream. Work is split on these
// blocks, never on threads, so results do not depend on the thread count.
inline constexpr std::size_t kBlockSize = 256;

// Bootstrap p-value of the Wasserstein distance between X and Y: the
// fraction of pooled resamples (with replacement, sizes |X| and |Y|) whose
// distance is >= the observed one. Scalars use the closed-form 1-D
// distance; vector samples use exact EMD with uniform weights.
SignificanceResult bootstrap_pvalue(std::span<const double> X, std::span<const double> Y,
                                    std::size_t max_itr, std::uint64_t seed, int p = 1);
SignificanceResult bootstrap_pvalue(std::span<const std::vector<double>> X,
                                    std::span<const std::vector<double>> Y,
                                    std::size_t max_itr, std::uint64_t seed, int p = 1);
// Atoms of two uniform clouds (e.g. embedded output words with multiplicity).
SignificanceResult bootstrap_pvalue(const embed::WeightedPointCloud& X,
                                    const embed::WeightedPointCloud& Y, std::size_t max_itr,
                                    std::uint64_t seed, int p = 1);

// Single-threaded references for the OpenMP kernels above; same draws,
// same result.
SignificanceResult bootstrap_pvalue_serial(std::span<const double> X, std::span<const double> Y,
                                           std::size_t max_itr, std::uint64_t seed, int p = 1);
SignificanceResult bootstrap_pvalue_serial(const embed::WeightedPointCloud& X,
                                           const embed::WeightedPointCloud& Y,
                                           std::size_t max_itr, std::uint64_t seed, int p = 1);

// Keeps records with p_value <= alpha, plus record 0 unconditionally.
std::vector<PerturbationRecord> filter_significant(std::span<const PerturbationRecord> records,
                                                   double alpha);

}  // namespace gsmile::significance
