#include "gsmile/surrogate.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "gsmile/error.hpp"

namespace gsmile::surrogate {
namespace {

// sqrt(w)-scaled design and response, centered on the weighted means.
struct CenteredProblem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd z_mean;
  double y_mean = 0.0;
};

std::size_t validate(FeatureRows Z, std::span<const double> y, std::span<const double> w) {
  if (Z.empty()) throw Error(ErrorCode::ShapeMismatch, "need at least one observation");
  const std::size_t m = Z.front().size();
  if (m == 0) throw Error(ErrorCode::ShapeMismatch, "feature rows are empty");
  for (const auto& row : Z)
    if (row.size() != m) throw Error(ErrorCode::ShapeMismatch, "ragged feature rows");
  if (y.size() != Z.size() || w.size() != Z.size())
    throw Error(ErrorCode::ShapeMismatch, "Z has " + std::to_string(Z.size()) + " rows, y has " +
                                              std::to_string(y.size()) + ", w has " +
                                              std::to_string(w.size()));
  bool any_positive = false;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (!(w[j] >= 0.0) || !std::isfinite(w[j]))
      throw Error(ErrorCode::InvalidArgument, "weights must be finite and nonnegative");
    if (!std::isfinite(y[j])) throw Error(ErrorCode::InvalidArgument, "non-finite response");
    any_positive = any_positive || w[j] > 0.0;
  }
  if (!any_positive) throw Error(ErrorCode::AllZeroWeights, "all weights are zero");
  return m;
}

CenteredProblem center(FeatureRows Z, std::span<const double> y, std::span<const double> w,
                       std::size_t m) {
  const Eigen::Index J = static_cast<Eigen::Index>(Z.size());
  const Eigen::Index M = static_cast<Eigen::Index>(m);
  CenteredProblem p;
  p.z_mean = Eigen::VectorXd::Zero(M);
  double wsum = 0.0;
  for (Eigen::Index j = 0; j < J; ++j) {
    const double wj = w[static_cast<std::size_t>(j)];
    wsum += wj;
    p.y_mean += wj * y[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < M; ++i)
      p.z_mean[i] += wj * Z[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  }
  p.z_mean /= wsum;
  p.y_mean /= wsum;

  p.X.resize(J, M);
  p.y.resize(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const double s = std::sqrt(w[ju]);
    for (Eigen::Index i = 0; i < M; ++i)
      p.X(j, i) = s * (Z[ju][static_cast<std::size_t>(i)] - p.z_mean[i]);
    p.y[j] = s * (y[ju] - p.y_mean);
  }
  return p;
}

}  // namespace

SurrogateKind parse_kind(std::string_view name) {
  if (name == "weighted_linear") return SurrogateKind::WeightedLinear;
  if (name == "bayesian_ridge") return SurrogateKind::BayesianRidge;
  throw Error(ErrorCode::ConfigError, "unknown surrogate kind '" + std::string(name) + "'");
}

std::string_view to_string(SurrogateKind kind) noexcept {
  return kind == SurrogateKind::WeightedLinear ? "weighted_linear" : "bayesian_ridge";
}

SurrogateModel fit_weighted_linear(FeatureRows Z, std::span<const double> y,
                                   std::span<const double> w, double ridge_lambda) {
  const std::size_t m = validate(Z, y, w);
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda))
    throw Error(ErrorCode::InvalidArgument, "ridge_lambda must be >= 0");
  auto p = center(Z, y, w, m);

  const Eigen::Index J = p.X.rows(), M = p.X.cols();
  Eigen::MatrixXd A = p.X;
  Eigen::VectorXd b = p.y;
  if (ridge_lambda > 0.0) {
    A.conservativeResize(J + M, M);
    A.bottomRows(M) = std::sqrt(ridge_lambda) * Eigen::MatrixXd::Identity(M, M);
    b.conservativeResize(J + M);
    b.tail(M).setZero();
  }
  const Eigen::VectorXd theta = A.completeOrthogonalDecomposition().solve(b);

  SurrogateModel model;
  model.kind = SurrogateKind::WeightedLinear;
  model.ridge_lambda = ridge_lambda;
  model.coefficients.assign(theta.data(), theta.data() + theta.size());
  model.intercept = p.y_mean - theta.dot(p.z_mean);
  return model;
}

SurrogateModel fit_bayesian_ridge(FeatureRows Z, std::span<const double> y,
                                  std::span<const double> w, const BayesianRidgeOptions& opt) {
  const std::size_t m = validate(Z, y, w);
  auto p = center(Z, y, w, m);
  const Eigen::Index J = p.X.rows(), M = p.X.cols();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.X, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::MatrixXd& V = svd.matrixV();
  // Eigenvalues of X^T X, padded with zeros up to M.
  Eigen::VectorXd eig = Eigen::VectorXd::Zero(M);
  const Eigen::VectorXd& sv = svd.singularValues();
  for (Eigen::Index k = 0; k < sv.size(); ++k) eig[k] = sv[k] * sv[k];
  Eigen::VectorXd proj = Eigen::VectorXd::Zero(M);  // V^T X^T y
  proj.head(sv.size()) = sv.cwiseProduct(svd.matrixU().transpose() * p.y);

  const double var_y = J > 0 ? p.y.squaredNorm() / static_cast<double>(J) : 0.0;
  double noise = 1.0 / (var_y + std::numeric_limits<double>::epsilon());
  double prior = opt.fixed_prior_precision.value_or(1.0);

  Eigen::VectorXd mean(M);
  auto posterior_mean = [&] {
    // (prior I + noise X^T X)^{-1} noise X^T y, in the V basis.
    Eigen::VectorXd c = (noise * proj).cwiseQuotient((prior + noise * eig.array()).matrix());
    mean = V * c;
  };

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    posterior_mean();
    const double sse = (p.y - p.X * mean).squaredNorm();
    const double gamma = (noise * eig.array() / (prior + noise * eig.array())).sum();
    const double new_prior = opt.fixed_prior_precision
                                 ? prior
                                 : (gamma + 2.0 * opt.prior_shape) /
                                       (mean.squaredNorm() + 2.0 * opt.prior_rate);
    const double new_noise =
        (static_cast<double>(J) - gamma + 2.0 * opt.noise_shape) / (sse + 2.0 * opt.noise_rate);
    const bool converged = std::abs(new_prior - prior) <= opt.tolerance * std::abs(prior) &&
                           std::abs(new_noise - noise) <= opt.tolerance * std::abs(noise);
    prior = new_prior;
    noise = new_noise;
    if (converged) {
      ++it;
      break;
    }
  }
  posterior_mean();

  SurrogateModel model;
  model.kind = SurrogateKind::BayesianRidge;
  model.coefficients.assign(mean.data(), mean.data() + M);
  model.intercept = p.y_mean - mean.dot(p.z_mean);
  model.noise_precision = noise;
  model.prior_precision = prior;
  model.iterations = it;
  const Eigen::VectorXd inv = (prior + noise * eig.array()).inverse().matrix();
  const Eigen::VectorXd var = (V * inv.asDiagonal() * V.transpose()).diagonal();
  model.posterior_variances = std::vector<double>(var.data(), var.data() + M);
  return model;
}

double predict(const SurrogateModel& model, std::span<const double> z) {
  if (z.size() != model.coefficients.size())
    throw Error(ErrorCode::ShapeMismatch, "feature vector has " + std::to_string(z.size()) +
                                              " entries, model expects " +
                                              std::to_string(model.coefficients.size()));
  double h = model.intercept;
  for (std::size_t i = 0; i < z.size(); ++i) h += model.coefficients[i] * z[i];
  return h;
}

double surrogate_loss(const SurrogateModel& model, FeatureRows Z, std::span<const double> y,
                      std::span<const double> w) {
  if (Z.empty() || y.size() != Z.size() || w.size() != Z.size())
    throw Error(ErrorCode::ShapeMismatch, "Z, y and w must have the same nonzero length");
  double acc = 0.0;
  for (std::size_t j = 0; j < Z.size(); ++j) {
    const double r = predict(model, Z[j]) - y[j];
    acc += w[j] * r * r;
  }
  return acc / static_cast<double>(Z.size());
}

}  // namespace gsmile::surrogate
