#include "gsmile/adapters.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <sstream>

#include "gsmile/error.hpp"
#include "gsmile/perturb.hpp"

namespace gsmile::adapters {
namespace {

using json = nlohmann::json;

std::string_view strip_punct(std::string_view s) {
  auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && punct(s.front())) s.remove_prefix(1);
  while (!s.empty() && punct(s.back())) s.remove_suffix(1);
  return s;
}

bool prompt_has_word(const std::vector<std::string>& words, const std::string& keyword) {
  const std::string kw = embed::ascii_lower(keyword);
  for (const auto& w : words) {
    const std::string lw = embed::ascii_lower(w);
    if (lw == kw || strip_punct(lw) == kw) return true;
  }
  return false;
}

std::vector<std::string> words_of(std::string_view prompt) {
  try {
    return perturb::tokenize(prompt).tokens;
  } catch (const Error&) {
    return {};
  }
}

void append_rows(std::string_view text, std::vector<std::string>& rows) {
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) rows.push_back(line);
}

class MockClient final : public ModelClient {
 public:
  MockClient(MockModel mock, OutputMode mode) : mock_(std::move(mock)), mode_(mode) {}
  std::string complete(std::string_view prompt) const override { return mock_.respond(prompt, mode_); }

 private:
  MockModel mock_;
  OutputMode mode_;
};

class HttpClient final : public ModelClient {
 public:
  explicit HttpClient(const ModelSpec& spec) : spec_(spec) {
    static const std::string_view schemes[] = {"http://", "https://"};
    const std::string& url = spec.endpoint;
    std::size_t after_scheme = std::string::npos;
    for (auto s : schemes)
      if (url.rfind(s, 0) == 0) after_scheme = s.size();
    if (after_scheme == std::string::npos)
      throw Error(ErrorCode::ConfigError, "http endpoint must start with http:// or https://");
    const std::size_t slash = url.find('/', after_scheme);
    base_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
  }

  std::string complete(std::string_view prompt) const override {
    httplib::Client cli(base_);
    const auto secs = std::chrono::duration<double>(spec_.timeout);
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(secs);
    cli.set_connection_timeout(us);
    cli.set_read_timeout(us);
    cli.set_write_timeout(us);
    auto res = cli.Post(path_, render_request(spec_.request_template, prompt), "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
        throw Error(ErrorCode::Timeout, "http request to " + spec_.endpoint + " timed out");
      throw Error(ErrorCode::TransportError,
                  "http request to " + spec_.endpoint + " failed: " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300)
      throw Error(ErrorCode::TransportError, "http status " + std::to_string(res->status));
    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("output") || !body["output"].is_string())
      throw Error(ErrorCode::MalformedResponse, "response JSON lacks string field \"output\"");
    return body["output"].get<std::string>();
  }

 private:
  ModelSpec spec_;
  std::string base_;
  std::string path_;
};

class SubprocessClient final : public ModelClient {
 public:
  explicit SubprocessClient(const ModelSpec& spec) : spec_(spec) {
    if (spec.endpoint.empty()) throw Error(ErrorCode::ConfigError, "subprocess command is empty");
    // Writes to a child that exited early must fail with EPIPE, not kill us.
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
  }

  std::string complete(std::string_view prompt) const override {
    int in_pipe[2], out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw sys_error("pipe");
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw sys_error("pipe");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
      throw sys_error("fork");
    }
    if (pid == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", spec_.endpoint.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    int to_child = in_pipe[1];
    const int from_child = out_pipe[0];
    ::fcntl(to_child, F_SETFL, O_NONBLOCK);

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(spec_.timeout);
    std::size_t written = 0;
    std::string output;
    bool timed_out = false;
    if (prompt.empty()) {
      ::close(to_child);
      to_child = -1;
    }
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        timed_out = true;
        break;
      }
      pollfd fds[2] = {{from_child, POLLIN, 0}, {to_child, POLLOUT, 0}};
      const int nfds = to_child >= 0 ? 2 : 1;
      if (::poll(fds, nfds, static_cast<int>(left.count())) < 0) {
        if (errno == EINTR) continue;
        break;
      }
      if (to_child >= 0 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
        const ssize_t n = ::write(to_child, prompt.data() + written, prompt.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN) written = prompt.size();
        if (written == prompt.size()) {
          ::close(to_child);
          to_child = -1;
        }
      }
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char buf[4096];
        const ssize_t n = ::read(from_child, buf, sizeof buf);
        if (n > 0) output.append(buf, static_cast<std::size_t>(n));
        else if (n == 0 || errno != EINTR) break;
      }
    }
    if (to_child >= 0) ::close(to_child);
    ::close(from_child);
    if (timed_out) ::kill(pid, SIGKILL);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) throw Error(ErrorCode::Timeout, "subprocess '" + spec_.endpoint + "' timed out");
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw Error(ErrorCode::TransportError,
                  "subprocess '" + spec_.endpoint + "' failed with status " + std::to_string(status));
    return output;
  }

 private:
  static Error sys_error(const char* what) {
    return Error(ErrorCode::TransportError, std::string(what) + ": " + std::strerror(errno));
  }

  ModelSpec spec_;
};

}  // namespace

ModelKind parse_model_kind(std::string_view name) {
  if (name == "http") return ModelKind::Http;
  if (name == "subprocess") return ModelKind::Subprocess;
  if (name == "mock") return ModelKind::Mock;
  throw Error(ErrorCode::ConfigError, "unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Http: return "http";
    case ModelKind::Subprocess: return "subprocess";
    case ModelKind::Mock: return "mock";
  }
  return "mock";
}

OutputMode parse_output_mode(std::string_view name) {
  if (name == "text") return OutputMode::Text;
  if (name == "image_cloud") return OutputMode::ImageCloud;
  throw Error(ErrorCode::ConfigError, "unknown output mode '" + std::string(name) + "'");
}

std::string_view to_string(OutputMode mode) noexcept {
  return mode == OutputMode::Text ? "text" : "image_cloud";
}

std::string MockModel::respond(std::string_view prompt, OutputMode mode) const {
  const auto words = words_of(prompt);
  if (mode == OutputMode::Text) {
    std::string out = base_response;
    for (const auto& [kw, fragment] : keyword_responses) {
      if (!prompt_has_word(words, kw) || fragment.empty()) continue;
      if (!out.empty()) out += ' ';
      out += fragment;
    }
    return out;
  }
  std::vector<std::string> rows;
  append_rows(base_response, rows);
  for (const auto& [kw, fragment] : keyword_responses)
    if (prompt_has_word(words, kw)) append_rows(fragment, rows);
  std::size_t dim = 0;
  if (!rows.empty()) {
    std::istringstream first(rows.front());
    std::string field;
    while (first >> field) ++dim;
  }
  std::string out = std::to_string(rows.size()) + " " + std::to_string(dim) + "\n";
  for (const auto& r : rows) out += r + "\n";
  return out;
}

std::string MockModel::canonical() const {
  json j;
  j["base_response"] = base_response;
  j["keyword_responses"] = json::array();
  for (const auto& [kw, fragment] : keyword_responses)
    j["keyword_responses"].push_back(json::array({kw, fragment}));
  return j.dump();
}

std::unique_ptr<ModelClient> make_client(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::Http: return std::make_unique<HttpClient>(spec);
    case ModelKind::Subprocess: return std::make_unique<SubprocessClient>(spec);
    case ModelKind::Mock: return std::make_unique<MockClient>(spec.mock, spec.mode);
  }
  throw Error(ErrorCode::ConfigError, "unknown model kind");
}

std::string render_request(std::string_view request_template, std::string_view prompt) {
  static constexpr std::string_view kPlaceholder = "{prompt}";
  const std::string literal = json(std::string(prompt)).dump();
  std::string out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t hit = request_template.find(kPlaceholder, pos);
    if (hit == std::string_view::npos) break;
    out.append(request_template.substr(pos, hit - pos));
    out += literal;
    pos = hit + kPlaceholder.size();
  }
  out.append(request_template.substr(pos));
  return out;
}

ModelOutput interpret_output(const ModelSpec& spec, std::string text) {
  ModelOutput out;
  if (spec.mode == OutputMode::ImageCloud) {
    try {
      out.cloud = embed::parse_point_cloud(text);
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedResponse, std::string("image_cloud response: ") + e.what());
    }
  }
  out.text = std::move(text);
  return out;
}

std::string complete_with_retry(const ModelSpec& spec, const ModelClient& client,
                                std::string_view prompt) {
  if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "prompt must be non-empty");
  for (int attempt = 0;; ++attempt) {
    try {
      return client.complete(prompt);
    } catch (const Error& e) {
      if (!is_adapter_error(e.code()) || attempt >= std::min(spec.retries, 1)) throw;
    }
  }
}

ModelOutput query(const ModelSpec& spec, std::string_view prompt) {
  const auto client = make_client(spec);
  return interpret_output(spec, complete_with_retry(spec, *client, prompt));
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::CacheIOError, "SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string cache_key(const ModelSpec& spec, std::string_view prompt) {
  std::string material;
  material += to_string(spec.kind);
  material += '\x1f';
  material += spec.kind == ModelKind::Mock ? spec.mock.canonical() : spec.endpoint;
  material += '\x1f';
  material += to_string(spec.mode);
  material += '\x1f';
  material += prompt;
  return sha256_hex(material);
}

ResponseCache::ResponseCache(std::filesystem::path file) : file_(std::move(file)) {
  std::error_code ec;
  if (!std::filesystem::exists(file_, ec)) return;
  std::ifstream in(file_);
  if (!in) throw Error(ErrorCode::CacheIOError, "cannot read cache " + file_.string());
  std::string line;
  while (std::getline(in, line)) {
    // A torn or foreign line must not poison the rest of the store.
    try {
      const auto rec = json::parse(line);
      entries_[rec.at("key").get<std::string>()] = rec.at("output").get<std::string>();
    } catch (const json::exception&) {
    }
  }
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  return std::nullopt;
}

void ResponseCache::put(const std::string& key, const std::string& output) {
  const json rec = {{"key", key}, {"output", output}, {"timestamp", rfc3339_now()}};
  const std::string line = rec.dump() + "\n";
  std::lock_guard lock(mu_);
  std::error_code ec;
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path(), ec);
  const int fd = ::open(file_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0)
    throw Error(ErrorCode::CacheIOError, "cannot open cache " + file_.string() + ": " + std::strerror(errno));
  const ssize_t n = ::write(fd, line.data(), line.size());
  ::close(fd);
  if (n != static_cast<ssize_t>(line.size()))
    throw Error(ErrorCode::CacheIOError, "short write to cache " + file_.string());
  entries_[key] = output;
}

std::filesystem::path default_cache_dir() {
  if (const char* dir = std::getenv("GSMILE_CACHE_DIR"); dir && *dir) return dir;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
    return std::filesystem::path(xdg) / "gsmile";
  if (const char* home = std::getenv("HOME"); home && *home)
    return std::filesystem::path(home) / ".cache" / "gsmile";
  return std::filesystem::path(".gsmile-cache");
}

std::string rfc3339_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace gsmile::adapters
