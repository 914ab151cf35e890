#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gsmile/embed.hpp"

namespace gsmile::adapters {

enum class ModelKind { Http, Subprocess, Mock };
enum class OutputMode { Text, ImageCloud };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind) noexcept;
OutputMode parse_output_mode(std::string_view name);
std::string_view to_string(OutputMode mode) noexcept;

// Deterministic stand-in for a generative model: the output is the base
// response followed by the fragment of every keyword found among the
// prompt's words (case-folded, surrounding punctuation ignored), in
// keyword-definition order.
//
// In image_cloud mode the base response and fragments are headerless rows of
// reals; the output is a point-cloud file "n d" + base rows + fragment rows.
struct MockModel {
  std::vector<std::pair<std::string, std::string>> keyword_responses;
  std::string base_response;

  std::string respond(std::string_view prompt, OutputMode mode = OutputMode::Text) const;
  // Canonical JSON text; identifies the mock in cache keys.
  std::string canonical() const;
};

inline constexpr std::string_view kDefaultRequestTemplate = R"({"prompt": {prompt}})";

struct ModelSpec {
  ModelKind kind = ModelKind::Mock;
  // URL for http, shell command for subprocess, unused for mock.
  std::string endpoint;
  // "{prompt}" is replaced with the prompt as a JSON string literal.
  std::string request_template{kDefaultRequestTemplate};
  OutputMode mode = OutputMode::Text;
  double timeout = 60.0;  // seconds
  std::size_t max_concurrency = 1;
  int retries = 0;  // 0 or 1
  MockModel mock;
};

struct ModelOutput {
  std::string text;
  std::optional<embed::WeightedPointCloud> cloud;  // image_cloud mode only
};

// A black-box text-in/text-out model. Implementations must be safe to call
// concurrently for distinct prompts.
class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string complete(std::string_view prompt) const = 0;
};

std::unique_ptr<ModelClient> make_client(const ModelSpec& spec);

// Renders the HTTP request body for a prompt.
std::string render_request(std::string_view request_template, std::string_view prompt);

// Parses raw model text per the ModelSpec output mode.
ModelOutput interpret_output(const ModelSpec& spec, std::string text);

// One call through a fresh client (with the ModelSpec retry policy) followed
// by interpret_output.
ModelOutput query(const ModelSpec& spec, std::string_view prompt);

// Calls `client` with the ModelSpec retry policy.
std::string complete_with_retry(const ModelSpec& spec, const ModelClient& client,
                                std::string_view prompt);

// Hex SHA-256 of (kind, endpoint-or-command, mode, prompt). For mock
// models the canonical mock definition stands in for the endpoint.
std::string cache_key(const ModelSpec& spec, std::string_view prompt);
std::string sha256_hex(std::string_view data);

// Append-only JSON-lines response store. Each line is
// {"key": <hex>, "output": <string>, "timestamp": <RFC 3339>}; the last
// record for a key wins. Appends are one write(2) on an O_APPEND
// descriptor, so concurrent writers never interleave records.
class ResponseCache {
 public:
  // Loads existing records; throws CacheIOError if the file exists but
  // cannot be read.
  explicit ResponseCache(std::filesystem::path file);

  std::optional<std::string> get(const std::string& key) const;
  // Throws CacheIOError when the append fails.
  void put(const std::string& key, const std::string& output);

  const std::filesystem::path& path() const noexcept { return file_; }

 private:
  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
};

// $GSMILE_CACHE_DIR, else $XDG_CACHE_HOME/gsmile, else ~/.cache/gsmile.
std::filesystem::path default_cache_dir();
inline constexpr std::string_view kCacheFileName = "responses.jsonl";

std::string rfc3339_now();

}  // namespace gsmile::adapters
