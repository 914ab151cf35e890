// gsmile command-line front end.
//
//   gsmile explain     --config run.json [--out report.json]
//   gsmile evaluate    --config run.json --truth 0,0,0,1,0,1
//   gsmile stability   --config run.json [--sentinel "***"]
//   gsmile consistency --config run.json [--runs 10] [--reseed]
//   gsmile render      (--report report.json | --config run.json) --format html|ansi --out PATH
//
// Exit codes: 0 success, 2 configuration error, 3 model adapter failure,
// 1 anything else.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "gsmile/error.hpp"
#include "gsmile/pipeline.hpp"

namespace {

using gsmile::pipeline::ordered_json;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> perturbations;
  std::optional<double> sigma;
  std::optional<double> alpha;
  std::string out;
  std::string format = "html";
  std::string truth;
  std::string sentinel = "***";
  std::size_t runs = 10;
  bool reseed = false;
  std::string report;
};

gsmile::pipeline::RunConfig load_config(const Overrides& o) {
  if (o.config.empty()) throw gsmile::Error(gsmile::ErrorCode::ConfigError, "--config is required");
  auto c = gsmile::pipeline::load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.perturbations) c.J = *o.perturbations;
  if (o.sigma) c.sigma = *o.sigma;
  if (o.alpha) c.alpha = *o.alpha;
  if (!o.truth.empty()) {
    std::vector<std::uint8_t> labels;
    std::stringstream ss(o.truth);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item != "0" && item != "1")
        throw gsmile::Error(gsmile::ErrorCode::ConfigError, "--truth takes comma-separated 0/1 labels");
      labels.push_back(item == "1");
    }
    c.truth = labels;
  }
  gsmile::pipeline::validate(c);
  return c;
}

void emit(const Overrides& o, const std::string& text) {
  if (o.out.empty()) std::cout << text;
  else gsmile::pipeline::write_text_file(o.out, text);
}

void print_warnings(const gsmile::pipeline::AttributionResult& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

int run_explain(const Overrides& o) {
  const auto c = load_config(o);
  const auto r = gsmile::pipeline::explain(c);
  print_warnings(r);
  emit(o, gsmile::pipeline::report_to_json(r).dump(2) + "\n");
  if (!o.out.empty()) std::cerr << gsmile::pipeline::render_heatmap(r, gsmile::pipeline::HeatmapFormat::Ansi);
  return 0;
}

int run_evaluate(const Overrides& o) {
  const auto c = load_config(o);
  if (!c.truth)
    throw gsmile::Error(gsmile::ErrorCode::ConfigError, "evaluate needs --truth or a \"truth\" field");
  gsmile::pipeline::AttributionResult r;
  const auto e = gsmile::pipeline::evaluate(c, {*c.truth}, &r);
  print_warnings(r);
  ordered_json j;
  j["acc"] = e.acc;
  j["f1"] = e.f1;
  j["auroc"] = e.auroc;
  j["threshold"] = c.threshold;
  j["tokens"] = r.tokens;
  j["normalized_scores"] = r.normalized_scores;
  emit(o, j.dump(2) + "\n");
  return 0;
}

int run_stability(const Overrides& o) {
  const auto c = load_config(o);
  const auto s = gsmile::pipeline::stability_probe(c, o.sentinel);
  ordered_json j;
  j["jaccard"] = s.jaccard;
  j["k"] = s.k;
  j["sentinel"] = o.sentinel;
  j["base_coefficients"] = s.base.coefficients;
  j["probe_tokens"] = s.probe.tokens;
  j["probe_coefficients"] = s.probe.coefficients;
  emit(o, j.dump(2) + "\n");
  return 0;
}

int run_consistency(const Overrides& o) {
  const auto c = load_config(o);
  const auto s = gsmile::pipeline::consistency_probe(c, o.runs, o.reseed);
  ordered_json j;
  j["runs"] = o.runs;
  j["reseed"] = o.reseed;
  j["variance"] = s.stats.variance;
  j["std"] = s.stats.std;
  j["coefficients"] = s.coefficients;
  emit(o, j.dump(2) + "\n");
  return 0;
}

int run_render(const Overrides& o) {
  const auto format = gsmile::pipeline::parse_heatmap_format(o.format);
  gsmile::pipeline::AttributionResult r;
  if (!o.report.empty()) {
    r = gsmile::pipeline::import_report(o.report);
  } else {
    r = gsmile::pipeline::explain(load_config(o));
    print_warnings(r);
  }
  emit(o, gsmile::pipeline::render_heatmap(r, format));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gsmile: perturbation-based attribution for black-box generative models"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration (JSON)");
    sub->add_option("--seed", o.seed, "override the RNG seed");
    sub->add_option("--perturbations", o.perturbations, "override J, the perturbation count");
    sub->add_option("--sigma", o.sigma, "override the Gaussian kernel width");
    sub->add_option("--alpha", o.alpha, "override the significance level");
    sub->add_option("--out", o.out, "output path (stdout when omitted)");
    sub->add_option("--format", o.format, "heatmap format: html or ansi")
        ->check(CLI::IsMember({"html", "ansi"}));
  };

  auto* explain = app.add_subcommand("explain", "attribute the prompt's tokens");
  add_common(explain);
  auto* evaluate = app.add_subcommand("evaluate", "score attributions against ground truth");
  add_common(evaluate);
  evaluate->add_option("--truth", o.truth, "comma-separated 0/1 label per token");
  auto* stability = app.add_subcommand("stability", "Jaccard stability under an appended sentinel");
  add_common(stability);
  stability->add_option("--sentinel", o.sentinel, "token appended to the prompt");
  stability->add_option("--truth", o.truth, "labels used to size the top-k sets");
  auto* consistency = app.add_subcommand("consistency", "coefficient spread over repeated runs");
  add_common(consistency);
  consistency->add_option("--runs", o.runs, "number of runs (>= 2)");
  consistency->add_flag("--reseed", o.reseed, "use seed + i for run i");
  auto* render = app.add_subcommand("render", "write a token heatmap");
  add_common(render);
  render->add_option("--report", o.report, "render an exported report instead of running");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*explain) return run_explain(o);
    if (*evaluate) return run_evaluate(o);
    if (*stability) return run_stability(o);
    if (*consistency) return run_consistency(o);
    if (*render) return run_render(o);
  } catch (const gsmile::Error& e) {
    std::cerr << "gsmile: " << e.what() << '\n';
    if (e.code() == gsmile::ErrorCode::ConfigError) return 2;
    if (gsmile::is_adapter_error(e.code())) return 3;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "gsmile: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
