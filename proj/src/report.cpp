#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gsmile/embed.hpp"
#include "gsmile/error.hpp"
#include "gsmile/pipeline.hpp"

namespace gsmile::pipeline {
namespace {

// xterm-256 ramp from white to dark red.
constexpr std::array<int, 9> kAnsiRamp = {231, 224, 217, 210, 203, 196, 160, 124, 88};
constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kDarkRed{139, 0, 0};

double clamp01(double v) { return std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0; }

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> read_optional(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

HeatmapFormat parse_heatmap_format(std::string_view name) {
  if (name == "html") return HeatmapFormat::Html;
  if (name == "ansi") return HeatmapFormat::Ansi;
  throw Error(ErrorCode::ConfigError, "format must be html or ansi");
}

Rgb heatmap_color(double score) {
  const double t = clamp01(score);
  auto lerp = [t](int a, int b) {
    return static_cast<int>(std::lround(a + (b - a) * t));
  };
  return {lerp(kWhite.r, kDarkRed.r), lerp(kWhite.g, kDarkRed.g), lerp(kWhite.b, kDarkRed.b)};
}

int heatmap_ansi_color(double score) {
  const double t = clamp01(score);
  const auto bucket = static_cast<std::size_t>(std::lround(t * (kAnsiRamp.size() - 1)));
  return kAnsiRamp[bucket];
}

std::string render_heatmap(const AttributionResult& result, HeatmapFormat format) {
  std::ostringstream out;
  const std::size_t m = result.tokens.size();
  auto score = [&](std::size_t i) {
    return i < result.normalized_scores.size() ? result.normalized_scores[i] : 0.0;
  };
  if (format == HeatmapFormat::Ansi) {
    for (std::size_t i = 0; i < m; ++i) {
      const double s = score(i);
      const int fg = s > 0.5 ? 15 : 16;
      if (i) out << ' ';
      out << "\x1b[48;5;" << heatmap_ansi_color(s) << "m\x1b[38;5;" << fg << "m "
          << result.tokens[i] << " \x1b[0m";
    }
    out << '\n';
    return out.str();
  }

  out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      << "<title>token attribution</title>\n</head>\n"
      << "<body style=\"font-family: sans-serif; font-size: 18px; line-height: 2.2;\">\n<p>\n";
  char score_text[32];
  for (std::size_t i = 0; i < m; ++i) {
    const double s = score(i);
    const Rgb c = heatmap_color(s);
    std::snprintf(score_text, sizeof score_text, "%.4f", s);
    out << "<span title=\"" << score_text << "\" style=\"background-color: rgb(" << c.r << ", "
        << c.g << ", " << c.b << "); color: " << (s > 0.5 ? "#ffffff" : "#000000")
        << "; padding: 2px 6px; margin: 2px; border-radius: 4px;\">"
        << html_escape(result.tokens[i]) << "</span>\n";
  }
  out << "</p>\n</body>\n</html>\n";
  return out.str();
}

void write_text_file(const std::filesystem::path& out, std::string_view text) {
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::FileWriteError, "cannot open " + out.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.flush();
  if (!f) throw Error(ErrorCode::FileWriteError, "write to " + out.string() + " failed");
}

void render_heatmap(const AttributionResult& result, HeatmapFormat format,
                    const std::filesystem::path& out) {
  write_text_file(out, render_heatmap(result, format));
}

ordered_json report_to_json(const AttributionResult& r) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["tokens"] = r.tokens;
  j["coefficients"] = r.coefficients;
  j["intercept"] = r.intercept;
  j["normalized_scores"] = r.normalized_scores;
  j["sigma_used"] = r.sigma_used;
  j["seed"] = r.seed;

  ordered_json s;
  s["kind"] = surrogate::to_string(r.surrogate.kind);
  s["ridge_lambda"] = r.surrogate.ridge_lambda;
  if (r.surrogate.posterior_variances) {
    s["posterior_variances"] = *r.surrogate.posterior_variances;
    s["noise_precision"] = r.surrogate.noise_precision;
    s["prior_precision"] = r.surrogate.prior_precision;
    s["iterations"] = r.surrogate.iterations;
  }
  j["surrogate"] = std::move(s);

  ordered_json records = ordered_json::array();
  for (const auto& rec : r.records) {
    ordered_json o;
    o["index"] = rec.index();
    o["mask"] = rec.mask.bits;
    o["prompt"] = rec.prompt;
    o["output"] = rec.output;
    o["delta"] = rec.delta;
    o["Delta"] = rec.Delta;
    o["weight"] = rec.weight;
    o["p_value"] = optional_number(rec.p_value);
    o["included"] = rec.included;
    o["note"] = rec.note;
    records.push_back(std::move(o));
  }
  j["records"] = std::move(records);

  ordered_json f;
  f["wmse"] = r.fidelity.wmse;
  f["wmae"] = r.fidelity.wmae;
  f["mean_l1"] = r.fidelity.mean_l1;
  f["mean_l2"] = r.fidelity.mean_l2;
  f["r2"] = optional_number(r.fidelity.r2);
  f["r2_w"] = optional_number(r.fidelity.r2_w);
  f["r2_w_adj"] = optional_number(r.fidelity.r2_w_adj);
  j["fidelity"] = std::move(f);
  j["warnings"] = r.warnings;
  // Concurrency is an execution detail; leaving it out keeps reports from
  // different concurrency levels byte-identical.
  j["config"] = config_to_json(r.config);
  j["config"]["model"].erase("max_concurrency");
  return j;
}

AttributionResult report_from_json(const ordered_json& j) {
  try {
    if (j.at("schema_version").get<std::string>() != kSchemaVersion)
      throw Error(ErrorCode::ParseError, "unsupported report schema_version");
    AttributionResult r;
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.coefficients = j.at("coefficients").get<std::vector<double>>();
    r.intercept = j.at("intercept").get<double>();
    r.normalized_scores = j.at("normalized_scores").get<std::vector<double>>();
    r.sigma_used = j.at("sigma_used").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();

    const auto& s = j.at("surrogate");
    r.surrogate.kind = surrogate::parse_kind(s.at("kind").get<std::string>());
    r.surrogate.ridge_lambda = s.at("ridge_lambda").get<double>();
    r.surrogate.coefficients = r.coefficients;
    r.surrogate.intercept = r.intercept;
    if (s.contains("posterior_variances")) {
      r.surrogate.posterior_variances = s["posterior_variances"].get<std::vector<double>>();
      r.surrogate.noise_precision = s.at("noise_precision").get<double>();
      r.surrogate.prior_precision = s.at("prior_precision").get<double>();
      r.surrogate.iterations = s.at("iterations").get<int>();
    }

    for (const auto& o : j.at("records")) {
      PerturbationRecord rec;
      rec.mask.bits = o.at("mask").get<std::vector<std::uint8_t>>();
      rec.mask.index = o.at("index").get<std::size_t>();
      rec.features = perturb::mask_to_features(rec.mask);
      rec.prompt = o.at("prompt").get<std::string>();
      rec.output = o.at("output").get<std::string>();
      rec.delta = o.at("delta").get<double>();
      rec.Delta = o.at("Delta").get<double>();
      rec.weight = o.at("weight").get<double>();
      rec.p_value = read_optional(o, "p_value");
      rec.included = o.at("included").get<bool>();
      rec.note = o.at("note").get<std::string>();
      r.records.push_back(std::move(rec));
    }

    const auto& f = j.at("fidelity");
    r.fidelity.wmse = f.at("wmse").get<double>();
    r.fidelity.wmae = f.at("wmae").get<double>();
    r.fidelity.mean_l1 = f.at("mean_l1").get<double>();
    r.fidelity.mean_l2 = f.at("mean_l2").get<double>();
    r.fidelity.r2 = read_optional(f, "r2");
    r.fidelity.r2_w = read_optional(f, "r2_w");
    r.fidelity.r2_w_adj = read_optional(f, "r2_w_adj");
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.config = config_from_json(j.at("config"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed report: ") + e.what());
  }
}

void export_report(const AttributionResult& result, const std::filesystem::path& out) {
  write_text_file(out, report_to_json(result).dump(2) + "\n");
}

AttributionResult import_report(const std::filesystem::path& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(embed::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report is not valid JSON: ") + e.what());
  }
  return report_from_json(j);
}

}  // namespace gsmile::pipeline
