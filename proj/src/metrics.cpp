#include "gsmile/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gsmile/error.hpp"

namespace gsmile::metrics {
namespace {

void check_lengths(std::size_t scores, const GroundTruth& truth) {
  if (scores != truth.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(scores) + " scores for " +
                                               std::to_string(truth.size()) + " labels");
  if (scores == 0) throw Error(ErrorCode::EmptyInput, "no scores");
}

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Confusion confusion(std::span<const double> scores, const GroundTruth& truth, double threshold) {
  check_lengths(scores.size(), truth);
  const auto norm = minmax_normalize(scores);
  Confusion c;
  for (std::size_t i = 0; i < norm.size(); ++i) {
    const bool pred = norm[i] >= threshold;
    const bool label = truth.labels[i] != 0;
    if (pred && label) ++c.tp;
    else if (pred) ++c.fp;
    else if (label) ++c.fn;
    else ++c.tn;
  }
  return c;
}

bool is_constant(std::span<const double> y) {
  auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  return *lo == *hi;
}

struct FidelityCore {
  double wmse, wmae, l1, l2, sse, sse_w, sst, sst_w;
  std::size_t J;
};

FidelityCore core(std::span<const double> y, std::span<const double> yhat,
                  std::span<const double> w) {
  if (y.size() != yhat.size() || y.size() != w.size())
    throw Error(ErrorCode::LengthMismatch, "y, yhat and w must have equal lengths");
  if (y.empty()) throw Error(ErrorCode::EmptyInput, "fidelity needs at least one point");
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(wsum > 0.0)) throw Error(ErrorCode::AllZeroWeights, "weights sum to zero");

  const std::size_t J = y.size();
  const double ymean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(J);
  double ywmean = 0.0;
  for (std::size_t j = 0; j < J; ++j) ywmean += w[j] * y[j];
  ywmean /= wsum;

  FidelityCore c{};
  c.J = J;
  for (std::size_t j = 0; j < J; ++j) {
    const double r = y[j] - yhat[j];
    c.sse += r * r;
    c.sse_w += w[j] * r * r;
    c.wmae += w[j] * std::abs(r);
    c.l1 += std::abs(r);
    c.sst += (y[j] - ymean) * (y[j] - ymean);
    c.sst_w += w[j] * (y[j] - ywmean) * (y[j] - ywmean);
  }
  c.wmse = c.sse_w / wsum;
  c.wmae /= wsum;
  c.l1 /= static_cast<double>(J);
  c.l2 = c.sse / static_cast<double>(J);
  // A constant response has zero total variance even if rounding says otherwise.
  if (is_constant(y)) c.sst = c.sst_w = 0.0;
  return c;
}

}  // namespace

std::size_t GroundTruth::positives() const noexcept {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

std::vector<double> minmax_normalize(std::span<const double> scores) {
  std::vector<double> out(scores.size(), 0.0);
  if (scores.empty()) return out;
  auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double range = *hi - *lo;
  if (range > 0.0)
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *lo) / range;
  return out;
}

double att_acc(std::span<const double> scores, const GroundTruth& truth, double threshold) {
  const auto c = confusion(scores, truth, threshold);
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(scores.size());
}

double att_f1(std::span<const double> scores, const GroundTruth& truth, double threshold) {
  const auto c = confusion(scores, truth, threshold);
  const double precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  const double recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double att_auroc(std::span<const double> scores, const GroundTruth& truth, TiePolicy ties) {
  check_lengths(scores.size(), truth);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i)
    (truth.labels[i] ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty())
    throw Error(ErrorCode::DegenerateTruth, "AUROC needs at least one positive and one negative");
  double hits = 0.0;
  for (double sp : pos)
    for (double sn : neg) {
      if (sp > sn) hits += 1.0;
      else if (sp == sn && ties == TiePolicy::Half) hits += 0.5;
    }
  return hits / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

std::vector<std::size_t> topk_indices(std::span<const double> coeffs, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  if (k > coeffs.size())
    throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " exceeds " +
                                          std::to_string(coeffs.size()) + " tokens");
  std::vector<std::size_t> idx(coeffs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(coeffs[a]) > std::abs(coeffs[b]);
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double jaccard_topk(std::span<const double> coeffs_a, std::span<const double> coeffs_b,
                    std::size_t k) {
  if (k > std::min(coeffs_a.size(), coeffs_b.size()))
    throw Error(ErrorCode::KTooLarge, "k exceeds the shorter coefficient vector");
  const auto a = topk_indices(coeffs_a, k);
  const auto b = topk_indices(coeffs_b, k);
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const std::size_t uni = a.size() + b.size() - common.size();
  return static_cast<double>(common.size()) / static_cast<double>(uni);
}

ConsistencyStats consistency_stats(std::span<const std::vector<double>> runs) {
  if (runs.size() < 2) throw Error(ErrorCode::TooFewRuns, "consistency needs at least two runs");
  const std::size_t m = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != m) throw Error(ErrorCode::LengthMismatch, "runs have different token counts");
  if (m == 0) throw Error(ErrorCode::EmptyInput, "runs have no tokens");

  const double n = static_cast<double>(runs.size());
  ConsistencyStats s;
  for (std::size_t i = 0; i < m; ++i) {
    // Welford: identical runs leave the mean untouched, so their variance is exactly 0.
    double mean = 0.0, m2 = 0.0, k = 0.0;
    for (const auto& r : runs) {
      k += 1.0;
      const double d = r[i] - mean;
      mean += d / k;
      m2 += d * (r[i] - mean);
    }
    const double var = m2 / n;
    s.variance += var;
    s.std += std::sqrt(var);
  }
  s.variance /= static_cast<double>(m);
  s.std /= static_cast<double>(m);
  return s;
}

FidelityReport fidelity_report(std::span<const double> y, std::span<const double> yhat,
                               std::span<const double> w, std::size_t n_features) {
  const auto c = core(y, yhat, w);
  if (c.J < 2) throw Error(ErrorCode::InvalidArgument, "fidelity needs at least two points");
  if (c.sst == 0.0 || c.sst_w == 0.0)
    throw Error(ErrorCode::DegenerateVariance, "response has zero variance");
  const auto dof = static_cast<long long>(c.J) - static_cast<long long>(n_features) - 1;
  if (dof == 0) throw Error(ErrorCode::AdjustedUndefined, "J - n_features - 1 == 0");
  FidelityReport r;
  r.wmse = c.wmse;
  r.wmae = c.wmae;
  r.mean_l1 = c.l1;
  r.mean_l2 = c.l2;
  r.r2 = 1.0 - c.sse / c.sst;
  r.r2_w = 1.0 - c.sse_w / c.sst_w;
  r.r2_w_adj = 1.0 - (1.0 - r.r2_w) * (static_cast<double>(c.J) - 1.0) / static_cast<double>(dof);
  return r;
}

FidelitySummary fidelity_summary(std::span<const double> y, std::span<const double> yhat,
                                 std::span<const double> w, std::size_t n_features) {
  const auto c = core(y, yhat, w);
  FidelitySummary s;
  s.wmse = c.wmse;
  s.wmae = c.wmae;
  s.mean_l1 = c.l1;
  s.mean_l2 = c.l2;
  if (c.sst == 0.0 || c.sst_w == 0.0) {
    s.warnings.emplace_back("DegenerateVariance: output shifts are constant; R^2 is undefined");
    return s;
  }
  s.r2 = 1.0 - c.sse / c.sst;
  s.r2_w = 1.0 - c.sse_w / c.sst_w;
  const auto dof = static_cast<long long>(c.J) - static_cast<long long>(n_features) - 1;
  if (dof == 0)
    s.warnings.emplace_back("AdjustedUndefined: J - n_features - 1 == 0");
  else
    s.r2_w_adj = 1.0 - (1.0 - *s.r2_w) * (static_cast<double>(c.J) - 1.0) / static_cast<double>(dof);
  return s;
}

}  // namespace gsmile::metrics
