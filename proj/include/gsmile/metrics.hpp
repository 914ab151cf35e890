#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gsmile::metrics {

// One 0/1 label per token.
struct GroundTruth {
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t positives() const noexcept;
};

enum class TiePolicy { Strict, Half };

inline constexpr double kDefaultThreshold = 0.5;

// Min-max normalization to [0,1]; all zeros when max == min.
std::vector<double> minmax_normalize(std::span<const double> scores);

double att_acc(std::span<const double> scores, const GroundTruth& truth,
               double threshold = kDefaultThreshold);
double att_f1(std::span<const double> scores, const GroundTruth& truth,
              double threshold = kDefaultThreshold);
// Fraction of positive/negative pairs ranked correctly; ties count 0
// (strict) or 1/2 (half).
double att_auroc(std::span<const double> scores, const GroundTruth& truth,
                 TiePolicy ties = TiePolicy::Strict);

// Positions of the k largest |coefficients|, ties to the earlier position.
std::vector<std::size_t> topk_indices(std::span<const double> coeffs, std::size_t k);
// Jaccard index of the two top-k position sets.
double jaccard_topk(std::span<const double> coeffs_a, std::span<const double> coeffs_b,
                    std::size_t k);

struct ConsistencyStats {
  double variance = 0.0;
  double std = 0.0;
};

// Per-token population variance / std across runs, averaged over tokens.
ConsistencyStats consistency_stats(std::span<const std::vector<double>> runs);

struct FidelityReport {
  double wmse = 0.0;
  double r2 = 0.0;
  double r2_w = 0.0;
  double r2_w_adj = 0.0;
  double wmae = 0.0;
  double mean_l1 = 0.0;
  double mean_l2 = 0.0;
};

// Throws LengthMismatch, DegenerateVariance (SST == 0), AdjustedUndefined
// (J - n_features - 1 == 0).
FidelityReport fidelity_report(std::span<const double> y, std::span<const double> yhat,
                               std::span<const double> w, std::size_t n_features);

// Same quantities, but the R^2 family is left empty (with a warning) when
// undefined instead of throwing. Used by the pipeline, where a constant
// output model is a legitimate outcome.
struct FidelitySummary {
  double wmse = 0.0;
  double wmae = 0.0;
  double mean_l1 = 0.0;
  double mean_l2 = 0.0;
  std::optional<double> r2;
  std::optional<double> r2_w;
  std::optional<double> r2_w_adj;
  std::vector<std::string> warnings;
};

FidelitySummary fidelity_summary(std::span<const double> y, std::span<const double> yhat,
                                 std::span<const double> w, std::size_t n_features);

}  // namespace gsmile::metrics
