#include <doctest.h>

#include <arpa/inet.h>
#include <httplib.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "gsmile/adapters.hpp"
#include "gsmile/error.hpp"
#include "test_util.hpp"

using namespace gsmile;
using namespace gsmile::adapters;

namespace {

MockModel rainy_mock() {
  MockModel m;
  m.base_response = "a scene";
  m.keyword_responses = {{"rainy", "RAIN STORM WET"}};
  return m;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no gsmile::Error thrown");
  return ErrorCode::InvalidArgument;
}

// Echo server on an ephemeral port. /echo returns the prompt, /slow sleeps,
// /flaky fails every other call, /bad returns non-JSON.
class StubServer {
 public:
  StubServer() {
    server_.Post("/echo", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      res.set_content(nlohmann::json{{"output", body.at("prompt")}}.dump(), "application/json");
    });
    server_.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1500));
      res.set_content(R"({"output": "late"})", "application/json");
    });
    server_.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
      if (flaky_calls_++ % 2 == 0) {
        res.status = 503;
        return;
      }
      res.set_content(R"({"output": "second try"})", "application/json");
    });
    server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("not json", "text/plain");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> flaky_calls_{0};
};

ModelSpec http_spec(const std::string& url) {
  ModelSpec s;
  s.kind = ModelKind::Http;
  s.endpoint = url;
  s.timeout = 5.0;
  return s;
}

ModelSpec sub_spec(const std::string& cmd, double timeout = 5.0) {
  ModelSpec s;
  s.kind = ModelKind::Subprocess;
  s.endpoint = cmd;
  s.timeout = timeout;
  return s;
}

}  // namespace

TEST_SUITE("adapters") {

TEST_CASE("mock keyword rule") {
  const auto m = rainy_mock();
  CHECK(m.respond("make this rainy") == "a scene RAIN STORM WET");
  CHECK(m.respond("make this") == "a scene");
  CHECK(m.respond("make this Rainy!") == "a scene RAIN STORM WET");
  CHECK(m.respond("make this rainyish") == "a scene");
}

TEST_CASE("mock fragments follow keyword order") {
  MockModel m;
  m.base_response = "a scene";
  m.keyword_responses = {{"make", "BUILD"}, {"rainy", "RAIN"}};
  CHECK(m.respond("rainy make") == "a scene BUILD RAIN");
  MockModel bare;
  bare.keyword_responses = {{"x", "X"}};
  CHECK(bare.respond("x") == "X");
  CHECK(bare.respond("y").empty());
}

TEST_CASE("mock in image_cloud mode") {
  MockModel m;
  m.base_response = "0 0\n1 1";
  m.keyword_responses = {{"rainy", "5 5"}};
  const auto text = m.respond("make this rainy", OutputMode::ImageCloud);
  CHECK(text == "3 2\n0 0\n1 1\n5 5\n");
  ModelSpec spec;
  spec.mode = OutputMode::ImageCloud;
  const auto out = interpret_output(spec, text);
  REQUIRE(out.cloud);
  CHECK(out.cloud->size() == 3);
  CHECK(code_of([&] { interpret_output(spec, "2 2\n1 1\n"); }) == ErrorCode::MalformedResponse);
}

TEST_CASE("mock is a pure function of the prompt") {
  ModelSpec spec;
  spec.mock = rainy_mock();
  for (const char* p : {"make this rainy", "rainy", "a b c"})
    CHECK(query(spec, p).text == query(spec, p).text);
}

TEST_CASE("request template substitution escapes the prompt") {
  CHECK(render_request(kDefaultRequestTemplate, "say \"hi\"\n") == R"({"prompt": "say \"hi\"\n"})");
  CHECK(render_request(R"({"a": {prompt}, "b": {prompt}})", "x") == R"({"a": "x", "b": "x"})");
  const auto parsed = nlohmann::json::parse(render_request(kDefaultRequestTemplate, "tab\there \\ done"));
  CHECK(parsed["prompt"] == "tab\there \\ done");
}

TEST_CASE("http adapter round trip and failures") {
  StubServer server;
  CHECK(query(http_spec(server.url("/echo")), "make this rainy").text == "make this rainy");
  CHECK(query(http_spec(server.url("/echo")), "ünïcode ✓").text == "ünïcode ✓");

  auto slow = http_spec(server.url("/slow"));
  slow.timeout = 0.3;
  CHECK(code_of([&] { query(slow, "x"); }) == ErrorCode::Timeout);

  CHECK(code_of([&] { query(http_spec(server.url("/bad")), "x"); }) == ErrorCode::MalformedResponse);
  CHECK(code_of([&] { query(http_spec(server.url("/missing")), "x"); }) == ErrorCode::TransportError);

  auto flaky = http_spec(server.url("/flaky"));
  CHECK(code_of([&] { query(flaky, "x"); }) == ErrorCode::TransportError);
  flaky.retries = 1;
  CHECK(query(flaky, "x").text == "second try");

  CHECK(code_of([] { make_client(http_spec("ftp://example")); }) == ErrorCode::ConfigError);
}

TEST_CASE("http adapter refused connection") {
  // Bind then close a socket so nothing listens on its port.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  const int port = ntohs(addr.sin_port);
  CHECK(code_of([&] { query(http_spec("http://127.0.0.1:" + std::to_string(port) + "/x"), "p"); }) ==
        ErrorCode::TransportError);
}

TEST_CASE("subprocess adapter") {
  CHECK(query(sub_spec("cat"), "make this rainy").text == "make this rainy");
  CHECK(query(sub_spec("tr a-z A-Z"), "rainy").text == "RAINY");
  CHECK(code_of([] { query(sub_spec("exit 3"), "x"); }) == ErrorCode::TransportError);
  CHECK(code_of([] { query(sub_spec("sleep 5", 0.3), "x"); }) == ErrorCode::Timeout);
  // Child that never reads stdin while we push a large prompt.
  const std::string big(1 << 20, 'a');
  CHECK(query(sub_spec("echo done"), big).text == "done\n");
}

TEST_CASE("subprocess adapter is safe under concurrent calls") {
  const auto client = make_client(sub_spec("cat"));
  std::vector<std::string> got(16);
  std::vector<std::jthread> ts;
  for (std::size_t i = 0; i < got.size(); ++i)
    ts.emplace_back([&, i] { got[i] = client->complete("prompt " + std::to_string(i)); });
  ts.clear();
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == "prompt " + std::to_string(i));
}

TEST_CASE("cache keys") {
  ModelSpec a;
  a.mock = rainy_mock();
  const auto k = cache_key(a, "make this rainy");
  CHECK(k.size() == 64);
  CHECK(k == cache_key(a, "make this rainy"));
  CHECK(k != cache_key(a, "make this"));
  ModelSpec b = a;
  b.mock.base_response = "another scene";
  CHECK(k != cache_key(b, "make this rainy"));
  ModelSpec c = a;
  c.mode = OutputMode::ImageCloud;
  CHECK(k != cache_key(c, "make this rainy"));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("response cache") {
  testutil::TempDir dir;
  const auto file = dir / "sub" / "responses.jsonl";
  {
    ResponseCache cache(file);
    CHECK_FALSE(cache.get("k1"));
    cache.put("k1", "first");
    CHECK(cache.get("k1") == "first");
    cache.put("k1", "second");
    CHECK(cache.get("k1") == "second");
    cache.put("k2", "line\nbreak \"quoted\"");
  }
  ResponseCache reloaded(file);
  CHECK(reloaded.get("k1") == "second");
  CHECK(reloaded.get("k2") == "line\nbreak \"quoted\"");

  // A torn line is skipped, not fatal.
  { std::ofstream(file, std::ios::app) << "{\"key\": \"k3\", \"outp"; }
  ResponseCache torn(file);
  CHECK(torn.get("k1") == "second");
  CHECK_FALSE(torn.get("k3"));
}

TEST_CASE("cache records are well formed") {
  testutil::TempDir dir;
  const auto file = dir / "responses.jsonl";
  ResponseCache cache(file);
  cache.put("abc", "out");
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  const auto rec = nlohmann::json::parse(line);
  CHECK(rec["key"] == "abc");
  CHECK(rec["output"] == "out");
  const auto ts = rec["timestamp"].get<std::string>();
  CHECK(ts.size() >= 20);
  CHECK(ts[4] == '-');
  CHECK(ts[10] == 'T');
}

TEST_CASE("concurrent appends never interleave") {
  testutil::TempDir dir;
  const auto file = dir / "responses.jsonl";
  {
    ResponseCache a(file), b(file);
    std::vector<std::jthread> ts;
    for (int t = 0; t < 4; ++t)
      ts.emplace_back([&, t] {
        auto& cache = t % 2 ? a : b;
        for (int i = 0; i < 200; ++i)
          cache.put("t" + std::to_string(t) + "-" + std::to_string(i), std::string(300, 'x'));
      });
  }
  std::ifstream in(file);
  std::string line;
  std::set<std::string> keys;
  while (std::getline(in, line)) keys.insert(nlohmann::json::parse(line).at("key").get<std::string>());
  CHECK(keys.size() == 800);
}

TEST_CASE("default cache dir honours the environment") {
  const char* saved = std::getenv("GSMILE_CACHE_DIR");
  const char* saved_xdg = std::getenv("XDG_CACHE_HOME");
  const std::string keep = saved ? saved : "", keep_xdg = saved_xdg ? saved_xdg : "";
  ::setenv("GSMILE_CACHE_DIR", "/tmp/gsmile-env-test", 1);
  CHECK(default_cache_dir() == "/tmp/gsmile-env-test");
  ::unsetenv("GSMILE_CACHE_DIR");
  ::setenv("XDG_CACHE_HOME", "/tmp/xdg", 1);
  CHECK(default_cache_dir() == std::filesystem::path("/tmp/xdg/gsmile"));
  ::unsetenv("XDG_CACHE_HOME");
  if (saved) ::setenv("GSMILE_CACHE_DIR", keep.c_str(), 1);
  if (saved_xdg) ::setenv("XDG_CACHE_HOME", keep_xdg.c_str(), 1);
}

TEST_CASE("kind and mode names") {
  CHECK(parse_model_kind("http") == ModelKind::Http);
  CHECK(parse_model_kind("subprocess") == ModelKind::Subprocess);
  CHECK(to_string(ModelKind::Mock) == "mock");
  CHECK(parse_output_mode("image_cloud") == OutputMode::ImageCloud);
  CHECK(code_of([] { parse_model_kind("grpc"); }) == ErrorCode::ConfigError);
}

}
