#include "gsmile/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "gsmile/embed.hpp"
#include "gsmile/error.hpp"
#include "gsmile/significance.hpp"
#include "gsmile/transport.hpp"

namespace gsmile::pipeline {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

[[noreturn]] void config_fail(const std::string& why) { throw Error(ErrorCode::ConfigError, why); }

// Fetches one output per distinct prompt, consulting the cache first and
// fanning misses out over at most max_concurrency threads. Results are
// indexed by prompt position, never by completion order.
class OutputFetcher {
 public:
  OutputFetcher(const RunConfig& config, const adapters::ModelClient& client,
                std::vector<std::string>& warnings)
      : config_(config), client_(client), warnings_(warnings) {
    if (!config.cache) return;
    const auto dir = config.cache_dir.value_or(adapters::default_cache_dir());
    try {
      cache_.emplace(dir / adapters::kCacheFileName);
    } catch (const Error& e) {
      warnings_.push_back(std::string("cache disabled: ") + e.what());
    }
  }

  std::vector<std::string> fetch(const std::vector<std::string>& prompts, RunStats& stats) {
    std::vector<std::string> outputs(prompts.size());
    std::vector<std::size_t> misses;
    std::vector<std::string> keys(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (cache_) {
        keys[i] = adapters::cache_key(config_.model, prompts[i]);
        if (auto hit = cache_->get(keys[i])) {
          outputs[i] = std::move(*hit);
          ++stats.cache_hits;
          continue;
        }
      }
      misses.push_back(i);
    }
    if (misses.empty()) return outputs;

    std::vector<std::exception_ptr> errors(prompts.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> calls{0};
    std::mutex warn_mu;
    bool cache_failed = false;
    auto worker = [&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= misses.size()) return;
        const std::size_t i = misses[k];
        try {
          calls.fetch_add(1);
          outputs[i] = adapters::complete_with_retry(config_.model, client_, prompts[i]);
        } catch (...) {
          errors[i] = std::current_exception();
          continue;
        }
        if (!cache_) continue;
        try {
          cache_->put(keys[i], outputs[i]);
        } catch (const Error&) {
          std::lock_guard lock(warn_mu);
          cache_failed = true;
        }
      }
    };
    const std::size_t threads = std::min(config_.model.max_concurrency, misses.size());
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    stats.adapter_calls += calls.load();
    if (cache_failed) warnings_.push_back("CacheIOError: some responses were not cached");
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return outputs;
  }

 private:
  const RunConfig& config_;
  const adapters::ModelClient& client_;
  std::vector<std::string>& warnings_;
  std::optional<adapters::ResponseCache> cache_;
};

// Output representation used for distances and the bootstrap.
struct OutputSample {
  std::optional<embed::WeightedPointCloud> distribution;  // nBOW or image cloud
  std::optional<embed::WeightedPointCloud> atoms;         // bootstrap samples
  std::string problem;
};

OutputSample make_sample(const RunConfig& config, const embed::EmbeddingTable& table,
                         const std::string& text) {
  OutputSample s;
  if (config.model.mode == adapters::OutputMode::ImageCloud) {
    auto out = adapters::interpret_output(config.model, text);
    s.distribution = *out.cloud;
    s.atoms = std::move(out.cloud);
    return s;
  }
  std::vector<std::string> words;
  try {
    words = perturb::tokenize(text).tokens;
  } catch (const Error&) {
    s.problem = "output is empty";
    return s;
  }
  try {
    s.distribution = embed::doc_to_nbow(words, table);
    s.atoms = embed::doc_to_atoms(words, table);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllTokensOOV) throw;
    s.problem = "output has no in-vocabulary words";
  }
  return s;
}

struct ShiftResult {
  double Delta = 0.0;
  std::optional<double> p_value;
};

template <class Fn>
void parallel_for_collect(std::size_t n, Fn&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void validate(const RunConfig& c) {
  if (c.prompt.find_first_not_of(" \t\r\n") == std::string::npos) config_fail("prompt is empty");
  if (c.embeddings.empty()) config_fail("embeddings path is required");
  if (c.J == 0) config_fail("J must be >= 1");
  if (c.sigma && !(*c.sigma > 0.0 && std::isfinite(*c.sigma))) config_fail("sigma must be > 0");
  if (c.p != 1 && c.p != 2) config_fail("p must be 1 or 2");
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) config_fail("alpha must lie in (0, 1]");
  if (!(c.ridge_lambda >= 0.0) || !std::isfinite(c.ridge_lambda)) config_fail("ridge_lambda must be >= 0");
  if (c.max_itr == 0 && c.alpha < 1.0) config_fail("max_itr = 0 requires alpha = 1");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) config_fail("threshold must lie in [0, 1]");
  if (c.topk && *c.topk == 0) config_fail("topk must be >= 1");
  if (c.model.max_concurrency == 0) config_fail("model.max_concurrency must be >= 1");
  if (!(c.model.timeout > 0.0)) config_fail("model.timeout must be > 0");
  if (c.model.retries < 0 || c.model.retries > 1) config_fail("model.retries must be 0 or 1");
  if (c.model.kind != adapters::ModelKind::Mock && c.model.endpoint.empty())
    config_fail("model.endpoint is required for http and subprocess models");
  if (c.truth)
    for (auto v : *c.truth)
      if (v > 1) config_fail("truth labels must be 0 or 1");
}

RunConfig config_from_json(const ordered_json& j, const std::filesystem::path& base_dir) {
  static const std::vector<std::string> known = {
      "prompt", "model", "embeddings", "J", "strategy", "seed", "sigma", "p", "alpha",
      "surrogate_kind", "ridge_lambda", "max_itr", "threshold", "topk", "weighting",
      "case_fold", "cache", "cache_dir", "truth"};
  if (!j.is_object()) config_fail("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      config_fail("unknown config field '" + key + "'");

  RunConfig c;
  try {
    c.prompt = j.at("prompt").get<std::string>();
    const auto& m = j.at("model");
    c.model.kind = adapters::parse_model_kind(m.at("kind").get<std::string>());
    if (m.contains("endpoint")) c.model.endpoint = m["endpoint"].get<std::string>();
    if (m.contains("request_template")) c.model.request_template = m["request_template"].get<std::string>();
    if (m.contains("mode")) c.model.mode = adapters::parse_output_mode(m["mode"].get<std::string>());
    if (m.contains("timeout")) c.model.timeout = m["timeout"].get<double>();
    if (m.contains("max_concurrency")) c.model.max_concurrency = m["max_concurrency"].get<std::size_t>();
    if (m.contains("retries")) c.model.retries = m["retries"].get<int>();
    if (m.contains("base_response")) c.model.mock.base_response = m["base_response"].get<std::string>();
    if (m.contains("keyword_responses")) {
      const auto& kr = m["keyword_responses"];
      if (kr.is_object()) {
        for (const auto& [kw, frag] : kr.items())
          c.model.mock.keyword_responses.emplace_back(kw, frag.get<std::string>());
      } else {
        for (const auto& pair : kr)
          c.model.mock.keyword_responses.emplace_back(pair.at(0).get<std::string>(),
                                                      pair.at(1).get<std::string>());
      }
    }
    std::filesystem::path emb = j.at("embeddings").get<std::string>();
    c.embeddings = emb.is_relative() && !base_dir.empty() ? base_dir / emb : emb;
    if (j.contains("J")) c.J = j["J"].get<std::size_t>();
    if (j.contains("strategy")) c.strategy = perturb::parse_strategy(j["strategy"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("sigma") && !j["sigma"].is_null()) c.sigma = j["sigma"].get<double>();
    if (j.contains("p")) c.p = j["p"].get<int>();
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("surrogate_kind"))
      c.surrogate_kind = surrogate::parse_kind(j["surrogate_kind"].get<std::string>());
    if (j.contains("ridge_lambda")) c.ridge_lambda = j["ridge_lambda"].get<double>();
    if (j.contains("max_itr")) c.max_itr = j["max_itr"].get<std::size_t>();
    if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
    if (j.contains("topk") && !j["topk"].is_null()) c.topk = j["topk"].get<std::size_t>();
    if (j.contains("weighting")) {
      const auto w = j["weighting"].get<std::string>();
      if (w == "gaussian") c.weighting = Weighting::Gaussian;
      else if (w == "uniform") c.weighting = Weighting::Uniform;
      else config_fail("weighting must be gaussian or uniform");
    }
    if (j.contains("case_fold")) c.case_fold = j["case_fold"].get<bool>();
    if (j.contains("cache")) c.cache = j["cache"].get<bool>();
    if (j.contains("cache_dir") && !j["cache_dir"].is_null()) {
      std::filesystem::path d = j["cache_dir"].get<std::string>();
      c.cache_dir = d.is_relative() && !base_dir.empty() ? base_dir / d : d;
    }
    if (j.contains("truth") && !j["truth"].is_null())
      c.truth = j["truth"].get<std::vector<std::uint8_t>>();
  } catch (const nlohmann::json::exception& e) {
    config_fail(std::string("malformed config: ") + e.what());
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = embed::read_file(path);
  } catch (const Error& e) {
    config_fail(e.what());
  }
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    config_fail(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, path.parent_path());
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json model;
  model["kind"] = adapters::to_string(c.model.kind);
  model["endpoint"] = c.model.endpoint;
  model["request_template"] = c.model.request_template;
  model["mode"] = adapters::to_string(c.model.mode);
  model["timeout"] = c.model.timeout;
  model["max_concurrency"] = c.model.max_concurrency;
  model["retries"] = c.model.retries;
  if (c.model.kind == adapters::ModelKind::Mock) {
    model["base_response"] = c.model.mock.base_response;
    model["keyword_responses"] = ordered_json::array();
    for (const auto& [kw, frag] : c.model.mock.keyword_responses)
      model["keyword_responses"].push_back(ordered_json::array({kw, frag}));
  }
  ordered_json j;
  j["prompt"] = c.prompt;
  j["model"] = std::move(model);
  j["embeddings"] = c.embeddings.string();
  j["J"] = c.J;
  j["strategy"] = perturb::to_string(c.strategy);
  j["seed"] = c.seed;
  j["sigma"] = c.sigma ? ordered_json(*c.sigma) : ordered_json(nullptr);
  j["p"] = c.p;
  j["alpha"] = c.alpha;
  j["surrogate_kind"] = surrogate::to_string(c.surrogate_kind);
  j["ridge_lambda"] = c.ridge_lambda;
  j["max_itr"] = c.max_itr;
  j["threshold"] = c.threshold;
  j["topk"] = c.topk ? ordered_json(*c.topk) : ordered_json(nullptr);
  j["weighting"] = c.weighting == Weighting::Gaussian ? "gaussian" : "uniform";
  j["case_fold"] = c.case_fold;
  j["cache"] = c.cache;
  j["cache_dir"] = c.cache_dir ? ordered_json(c.cache_dir->string()) : ordered_json(nullptr);
  j["truth"] = c.truth ? ordered_json(*c.truth) : ordered_json(nullptr);
  return j;
}

AttributionResult explain(const RunConfig& config) {
  validate(config);
  const auto client = adapters::make_client(config.model);
  return explain(config, *client);
}

AttributionResult explain(const RunConfig& config, const adapters::ModelClient& client) {
  validate(config);
  auto table = embed::load_embedding_table(config.embeddings);
  table.set_case_fold(config.case_fold);

  AttributionResult result;
  result.config = config;
  result.seed = config.seed;
  const auto seq = perturb::tokenize(config.prompt);
  const std::size_t m = seq.size();
  result.tokens = seq.tokens;

  const auto masks = perturb::sample_masks(m, config.J, config.seed, config.strategy);
  const std::size_t J = masks.size();
  result.records.resize(J);
  std::vector<std::string> distinct_prompts;
  std::map<std::string, std::size_t> prompt_slot;
  std::vector<std::size_t> slot_of(J);
  for (std::size_t j = 0; j < J; ++j) {
    auto& r = result.records[j];
    r.mask = masks[j];
    r.features = perturb::mask_to_features(masks[j]);
    r.prompt = perturb::apply_mask(seq, masks[j]);
    auto [it, fresh] = prompt_slot.try_emplace(r.prompt, distinct_prompts.size());
    if (fresh) distinct_prompts.push_back(r.prompt);
    slot_of[j] = it->second;
  }

  OutputFetcher fetcher(config, client, result.warnings);
  const auto outputs = fetcher.fetch(distinct_prompts, result.stats);
  for (std::size_t j = 0; j < J; ++j) result.records[j].output = outputs[slot_of[j]];

  // Input distances (IWMD) against the unperturbed prompt.
  const auto original_nbow = embed::doc_to_nbow(seq.tokens, table);
  parallel_for_collect(J, [&](std::size_t j) {
    auto& r = result.records[j];
    if (j == 0) return;
    const auto kept = perturb::masked_tokens(seq, r.mask);
    try {
      const auto nbow = embed::doc_to_nbow(kept, table);
      r.delta = transport::emd(original_nbow, nbow, 1).distance;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllTokensOOV) throw;
      r.included = false;
      r.note = "perturbed prompt has no in-vocabulary words";
    }
  });

  // Output shifts and bootstrap p-values, once per distinct output text.
  std::vector<std::string> distinct_outputs;
  std::map<std::string, std::size_t> output_slot;
  std::vector<std::size_t> out_of(J);
  std::vector<std::size_t> first_record;
  for (std::size_t j = 0; j < J; ++j) {
    auto [it, fresh] = output_slot.try_emplace(result.records[j].output, distinct_outputs.size());
    if (fresh) {
      distinct_outputs.push_back(result.records[j].output);
      first_record.push_back(j);
    }
    out_of[j] = it->second;
  }
  std::vector<OutputSample> samples(distinct_outputs.size());
  parallel_for_collect(samples.size(), [&](std::size_t k) {
    samples[k] = make_sample(config, table, distinct_outputs[k]);
  });
  const OutputSample& base = samples[out_of[0]];
  if (!base.distribution)
    throw Error(ErrorCode::AllTokensOOV, "baseline output: " + base.problem);

  std::vector<ShiftResult> shifts(samples.size());
  parallel_for_collect(samples.size(), [&](std::size_t k) {
    const auto& s = samples[k];
    if (!s.distribution) return;
    if (k == out_of[0]) {
      shifts[k].Delta = 0.0;
    } else {
      shifts[k].Delta = transport::emd(*base.distribution, *s.distribution, config.p).distance;
    }
    if (config.max_itr > 0) {
      const std::uint64_t seed = splitmix64(config.seed ^ splitmix64(first_record[k]));
      shifts[k].p_value =
          significance::bootstrap_pvalue(*base.atoms, *s.atoms, config.max_itr, seed, config.p).p_value;
    }
  });
  for (std::size_t j = 0; j < J; ++j) {
    auto& r = result.records[j];
    const auto& s = samples[out_of[j]];
    if (!s.distribution) {
      r.included = false;
      r.note = s.problem;
      continue;
    }
    r.Delta = shifts[out_of[j]].Delta;
    r.p_value = shifts[out_of[j]].p_value;
  }
  auto& baseline = result.records[0];
  baseline.delta = 0.0;
  baseline.Delta = 0.0;
  baseline.included = true;

  // Significance filter; record 0 always survives.
  if (config.alpha < 1.0) {
    std::vector<PerturbationRecord> candidates;
    for (const auto& r : result.records)
      if (r.included) candidates.push_back(r);
    const auto kept = significance::filter_significant(candidates, config.alpha);
    std::vector<std::uint8_t> keep(J, 0);
    for (const auto& r : kept) keep[r.index()] = 1;
    for (auto& r : result.records)
      if (r.included && !keep[r.index()]) {
        r.included = false;
        r.note = "not significant at alpha";
      }
  }

  std::vector<double> deltas;
  for (const auto& r : result.records)
    if (r.included) deltas.push_back(r.delta);
  result.sigma_used = config.sigma.value_or(transport::median_sigma(deltas));
  for (auto& r : result.records)
    r.weight = config.weighting == Weighting::Uniform
                   ? 1.0
                   : transport::gaussian_weight(r.delta, result.sigma_used);
  baseline.weight = 1.0;

  std::vector<std::vector<double>> Z;
  std::vector<double> y, w;
  for (const auto& r : result.records) {
    if (!r.included) continue;
    Z.push_back(r.features);
    y.push_back(r.Delta);
    w.push_back(r.weight);
  }
  if (Z.size() < m + 2)
    result.warnings.push_back("InsufficientRecords: " + std::to_string(Z.size()) +
                              " records survive for " + std::to_string(m) +
                              " tokens; the fit relies on ridge regularization");

  result.surrogate = config.surrogate_kind == surrogate::SurrogateKind::WeightedLinear
                         ? surrogate::fit_weighted_linear(Z, y, w, config.ridge_lambda)
                         : surrogate::fit_bayesian_ridge(Z, y, w);
  result.coefficients = result.surrogate.coefficients;
  result.intercept = result.surrogate.intercept;

  std::vector<double> yhat(Z.size());
  for (std::size_t k = 0; k < Z.size(); ++k) yhat[k] = surrogate::predict(result.surrogate, Z[k]);
  result.fidelity = metrics::fidelity_summary(y, yhat, w, m);
  result.warnings.insert(result.warnings.end(), result.fidelity.warnings.begin(),
                         result.fidelity.warnings.end());

  std::vector<double> magnitude(m);
  for (std::size_t i = 0; i < m; ++i) magnitude[i] = std::abs(result.coefficients[i]);
  result.normalized_scores = metrics::minmax_normalize(magnitude);
  return result;
}

EvaluationReport evaluate_scores(std::span<const double> scores, const metrics::GroundTruth& truth,
                                 double threshold) {
  EvaluationReport r;
  r.acc = metrics::att_acc(scores, truth, threshold);
  r.f1 = metrics::att_f1(scores, truth, threshold);
  r.auroc = metrics::att_auroc(scores, truth);
  return r;
}

EvaluationReport evaluate(const RunConfig& config, const metrics::GroundTruth& truth,
                          AttributionResult* result_out) {
  auto result = explain(config);
  if (truth.size() != result.tokens.size())
    throw Error(ErrorCode::LengthMismatch, "truth has " + std::to_string(truth.size()) +
                                               " labels for " +
                                               std::to_string(result.tokens.size()) + " tokens");
  auto report = evaluate_scores(result.normalized_scores, truth, config.threshold);
  if (result_out) *result_out = std::move(result);
  return report;
}

std::size_t default_topk(const RunConfig& config, std::size_t token_count) {
  if (config.topk) return *config.topk;
  if (config.truth) {
    const auto pos = static_cast<std::size_t>(std::count(config.truth->begin(), config.truth->end(), 1));
    if (pos > 0) return pos;
  }
  return (token_count + 1) / 2;
}

StabilityReport stability_probe(const RunConfig& config, std::string_view sentinel) {
  validate(config);
  const auto client = adapters::make_client(config.model);
  return stability_probe(config, *client, sentinel);
}

StabilityReport stability_probe(const RunConfig& config, const adapters::ModelClient& client,
                                std::string_view sentinel) {
  StabilityReport rep;
  rep.base = explain(config, client);
  RunConfig probed = config;
  if (!sentinel.empty()) probed.prompt = config.prompt + " " + std::string(sentinel);
  rep.probe = explain(probed, client);
  rep.k = default_topk(config, rep.base.tokens.size());
  // Compare over the tokens both runs share; the sentinel itself is not ranked.
  const std::span<const double> shared(rep.probe.coefficients.data(), rep.base.coefficients.size());
  rep.jaccard = metrics::jaccard_topk(rep.base.coefficients, shared, rep.k);
  return rep;
}

ConsistencyReport consistency_probe(const RunConfig& config, std::size_t runs, bool reseed) {
  if (runs < 2) throw Error(ErrorCode::TooFewRuns, "consistency needs at least two runs");
  validate(config);
  const auto client = adapters::make_client(config.model);
  ConsistencyReport rep;
  for (std::size_t i = 0; i < runs; ++i) {
    RunConfig c = config;
    if (reseed) c.seed = config.seed + i;
    rep.coefficients.push_back(explain(c, *client).coefficients);
  }
  rep.stats = metrics::consistency_stats(rep.coefficients);
  return rep;
}

}  // namespace gsmile::pipeline
