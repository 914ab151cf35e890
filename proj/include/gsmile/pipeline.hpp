#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gsmile/adapters.hpp"
#include "gsmile/metrics.hpp"
#include "gsmile/perturb.hpp"
#include "gsmile/record.hpp"
#include "gsmile/surrogate.hpp"

namespace gsmile::pipeline {

using ordered_json = nlohmann::ordered_json;

enum class Weighting { Gaussian, Uniform };

// Every free parameter of a run. JSON field names match the member names.
struct RunConfig {
  std::string prompt;
  adapters::ModelSpec model;
  std::filesystem::path embeddings;
  std::size_t J = 64;
  perturb::Strategy strategy = perturb::Strategy::Bernoulli;
  std::uint64_t seed = 0;
  std::optional<double> sigma;  // median heuristic when absent
  int p = 1;
  double alpha = 1.0;           // 1 disables the significance filter
  surrogate::SurrogateKind surrogate_kind = surrogate::SurrogateKind::WeightedLinear;
  double ridge_lambda = surrogate::kDefaultRidgeLambda;
  std::size_t max_itr = 10'000;  // bootstrap iterations; 0 skips (alpha must be 1)
  double threshold = metrics::kDefaultThreshold;
  std::optional<std::size_t> topk;
  Weighting weighting = Weighting::Gaussian;
  bool case_fold = true;
  bool cache = true;
  std::optional<std::filesystem::path> cache_dir;  // overrides GSMILE_CACHE_DIR
  std::optional<std::vector<std::uint8_t>> truth;
};

// Throws ConfigError on any out-of-range field.
void validate(const RunConfig& config);
RunConfig config_from_json(const ordered_json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
ordered_json config_to_json(const RunConfig& config);

struct RunStats {
  std::size_t adapter_calls = 0;
  std::size_t cache_hits = 0;
};

struct AttributionResult {
  std::vector<std::string> tokens;
  std::vector<double> coefficients;
  double intercept = 0.0;
  std::vector<double> normalized_scores;  // min-max of |coefficients|
  std::vector<PerturbationRecord> records;
  metrics::FidelitySummary fidelity;
  double sigma_used = 1.0;
  std::uint64_t seed = 0;
  surrogate::SurrogateModel surrogate;
  std::vector<std::string> warnings;
  RunConfig config;
  RunStats stats;  // diagnostics only; never serialized
};

// Full attribution run: perturb, query, distances, significance, weights,
// surrogate fit and fidelity. The overload taking a client bypasses
// make_client (the cache still applies).
AttributionResult explain(const RunConfig& config);
AttributionResult explain(const RunConfig& config, const adapters::ModelClient& client);

struct EvaluationReport {
  double acc = 0.0;
  double f1 = 0.0;
  double auroc = 0.0;
};

// Scores normalized attributions against token labels.
EvaluationReport evaluate_scores(std::span<const double> normalized_scores,
                                 const metrics::GroundTruth& truth, double threshold);
EvaluationReport evaluate(const RunConfig& config, const metrics::GroundTruth& truth,
                          AttributionResult* result_out = nullptr);

struct StabilityReport {
  double jaccard = 0.0;
  std::size_t k = 0;
  AttributionResult base;
  AttributionResult probe;
};

// Top-k size: config.topk, else number of ground-truth positives, else ceil(m/2).
std::size_t default_topk(const RunConfig& config, std::size_t token_count);

StabilityReport stability_probe(const RunConfig& config, std::string_view sentinel = "***");
StabilityReport stability_probe(const RunConfig& config, const adapters::ModelClient& client,
                                std::string_view sentinel = "***");

struct ConsistencyReport {
  metrics::ConsistencyStats stats;
  std::vector<std::vector<double>> coefficients;
};

ConsistencyReport consistency_probe(const RunConfig& config, std::size_t runs, bool reseed);

enum class HeatmapFormat { Html, Ansi };
HeatmapFormat parse_heatmap_format(std::string_view name);

// Background color of a normalized score: white at 0 to dark red at 1.
struct Rgb {
  int r, g, b;
};
Rgb heatmap_color(double score);
int heatmap_ansi_color(double score);

std::string render_heatmap(const AttributionResult& result, HeatmapFormat format);
void render_heatmap(const AttributionResult& result, HeatmapFormat format,
                    const std::filesystem::path& out);

inline constexpr std::string_view kSchemaVersion = "1";

ordered_json report_to_json(const AttributionResult& result);
AttributionResult report_from_json(const ordered_json& j);
void export_report(const AttributionResult& result, const std::filesystem::path& out);
AttributionResult import_report(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& out, std::string_view text);

}  // namespace gsmile::pipeline
