#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gsmile/embed.hpp"

namespace gsmile::transport {

// Optimal flow matrix (rows x cols, row-major) and its total cost.
struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> flows;
  double cost = 0.0;

  double flow(std::size_t i, std::size_t j) const { return flows[i * cols + j]; }
};

struct EmdResult {
  double distance = 0.0;
  TransportPlan plan;
};

// Norm order of the Wasserstein-p distance; only 1 and 2 are supported.
void check_norm_order(int p);

// Ground cost |a_i - b_j|^p (Euclidean norm) as a row-major matrix.
// The OpenMP version splits rows across threads; the serial one is the
// reference the parallel kernel is tested against.
std::vector<double> pairwise_cost(const embed::WeightedPointCloud& a,
                                  const embed::WeightedPointCloud& b, int p);
std::vector<double> pairwise_cost_serial(const embed::WeightedPointCloud& a,
                                         const embed::WeightedPointCloud& b, int p);

// Exact transportation simplex (northwest-corner start, MODI pricing,
// Dantzig entering rule with lowest-index ties). Supplies and demands must
// each sum to 1 within 1e-9.
TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                              std::span<const double> cost);

// Earth mover's distance: (min transport cost)^(1/p) with Euclidean ground
// distance raised to p.
EmdResult emd(const embed::WeightedPointCloud& a, const embed::WeightedPointCloud& b, int p = 1);

// Word Mover's Distance between two token lists (nBOW + emd with p = 1).
double wmd(std::span<const std::string> tokens_a, std::span<const std::string> tokens_b,
           const embed::EmbeddingTable& table);

// Closed-form Wasserstein-p between empirical 1-D distributions via sorted
// quantile coupling. Exact for unequal sample sizes.
double wasserstein_1d(std::span<const double> xs, std::span<const double> ys, int p = 1);

// exp(-(delta / sigma)^2)
double gaussian_weight(double delta, double sigma);

// Median of the strictly positive deltas; 1.0 if there are none.
double median_sigma(std::span<const double> deltas);

}  // namespace gsmile::transport
