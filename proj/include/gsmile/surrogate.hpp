#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace gsmile::surrogate {

enum class SurrogateKind { WeightedLinear, BayesianRidge };

SurrogateKind parse_kind(std::string_view name);
std::string_view to_string(SurrogateKind kind) noexcept;

inline constexpr double kDefaultRidgeLambda = 1e-8;

// h(z) = intercept + coefficients . z
struct SurrogateModel {
  double intercept = 0.0;
  std::vector<double> coefficients;
  SurrogateKind kind = SurrogateKind::WeightedLinear;
  double ridge_lambda = 0.0;
  // Bayesian ridge only.
  std::optional<std::vector<double>> posterior_variances;
  double noise_precision = 0.0;
  double prior_precision = 0.0;
  int iterations = 0;
};

// Feature rows z_j, one per perturbation.
using FeatureRows = std::span<const std::vector<double>>;

// Minimizes sum_j w_j (theta0 + theta.z_j - y_j)^2 + lambda |theta|^2.
// The intercept is never penalized. Rank-deficient designs resolve to the
// minimum-norm theta.
SurrogateModel fit_weighted_linear(FeatureRows Z, std::span<const double> y,
                                   std::span<const double> w,
                                   double ridge_lambda = kDefaultRidgeLambda);

struct BayesianRidgeOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;  // relative change of both precisions
  // Gamma hyperpriors (shape, rate) on noise and prior precision.
  double noise_shape = 1e-6, noise_rate = 1e-6;
  double prior_shape = 1e-6, prior_rate = 1e-6;
  // If set, the prior precision is held fixed and only the noise precision
  // is re-estimated.
  std::optional<double> fixed_prior_precision;
};

// Conjugate Bayesian linear regression on sqrt(w)-scaled, weighted-centered
// data with evidence maximization of both precisions.
SurrogateModel fit_bayesian_ridge(FeatureRows Z, std::span<const double> y,
                                  std::span<const double> w,
                                  const BayesianRidgeOptions& options = {});

double predict(const SurrogateModel& model, std::span<const double> z);

// (1/J) sum_j w_j (h(z_j) - y_j)^2
double surrogate_loss(const SurrogateModel& model, FeatureRows Z, std::span<const double> y,
                      std::span<const double> w);

}  // namespace gsmile::surrogate
