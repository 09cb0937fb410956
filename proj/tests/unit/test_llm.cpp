#include "test_support.hpp"

#include "intopt/error.hpp"
#include "intopt/llm.hpp"
#include "intopt/process.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <thread>

using namespace intopt;
using namespace intopt::llm;
namespace fs = std::filesystem;

namespace {

// Canonical encoding written out by hand, digested by coreutils.
std::string oracle_hash(const std::string& backend, const std::string& prompt, const std::string& temperature,
                        int max_tokens) {
  auto esc = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '"') out += "\\\"";
      else if (c == '\\') out += "\\\\";
      else if (c == '\n') out += "\\n";
      else out += c;
    }
    return out;
  };
  std::string canon = "{\"backend_id\":\"" + esc(backend) + "\",\"prompt\":\"" + esc(prompt) +
                      "\",\"sampling\":{\"temperature\":" + temperature +
                      ",\"max_output_tokens\":" + std::to_string(max_tokens) + "}}";
  auto r = run_process({"sha256sum"}, {.stdin_text = canon});
  return r.out.substr(0, 64);
}

struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  LocalServer() = default;
  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

BackendConfig http_config(const std::string& url, BackendKind kind = BackendKind::OpenAiChat) {
  BackendConfig c;
  c.id = "local-test";
  c.kind = kind;
  c.endpoint = url;
  c.model = "m1";
  c.initial_backoff = std::chrono::milliseconds(1);
  c.max_backoff = std::chrono::milliseconds(4);
  c.max_retries = 3;
  c.timeout = std::chrono::seconds(10);
  return c;
}

}  // namespace

TEST_CASE("request_hash matches an independent digest of the canonical encoding") {
  if (!find_on_path("sha256sum")) return;
  LlmRequest r{"mock", "line one\nsays \"hi\" \\ bye", {0.0, 4096}, Purpose::Refinement};
  CHECK(request_hash(r) == oracle_hash("mock", r.prompt, "0.0", 4096));
  r.sampling = {0.5, 100};
  CHECK(request_hash(r) == oracle_hash("mock", r.prompt, "0.5", 100));
}

TEST_CASE("request_hash covers backend, prompt and sampling but not purpose") {
  LlmRequest a{"b", "p", {}, Purpose::Formulation};
  LlmRequest b = a;
  b.purpose = Purpose::Realization;
  CHECK(request_hash(a) == request_hash(b));
  b = a;
  b.backend_id = "c";
  CHECK(request_hash(a) != request_hash(b));
  b = a;
  b.prompt = "p ";
  CHECK(request_hash(a) != request_hash(b));
  b = a;
  b.sampling.max_output_tokens = 1;
  CHECK(request_hash(a) != request_hash(b));
  CHECK(request_hash(a).size() == 64);
}

TEST_CASE("recorded fixtures are keyed by their own request hash") {
  auto dir = test_support::fixtures() / "e2e" / "transcripts";
  int n = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto doc = nlohmann::json::parse(read_file(entry.path()));
    LlmRequest r{doc["backend_id"], doc["prompt"],
                 {doc["sampling"]["temperature"], doc["sampling"]["max_output_tokens"]}, Purpose::Formulation};
    CHECK(request_hash(r) == entry.path().stem().string());
    ++n;
  }
  CHECK(n > 0);
}

TEST_CASE("transcript store save, load, and corrupt files") {
  TempDir tmp;
  auto dir = tmp.path() / "t";
  TranscriptStore store(dir);
  CHECK(store.load() == 0);
  LlmTranscript t{"abc", "mock", "formulation", "prompt", {0.0, 10}, "response", "2024-01-01T00:00:00Z"};
  store.save(t);
  CHECK(fs::exists(dir / "abc.json"));
  write_file(dir / "broken.json", "{not json");
  write_file(dir / "mismatch.json", R"({"request_hash": "other", "response": "x"})");
  write_file(dir / "notes.txt", "ignored");

  TranscriptStore again(dir);
  CHECK(again.load() == 1);
  auto found = again.find("abc");
  REQUIRE(found);
  CHECK(found->response == "response");
  CHECK(found->sampling == Sampling{0.0, 10});
  CHECK_FALSE(again.find("other"));
}

TEST_CASE("replay returns recorded responses and fails loudly on a miss") {
  TempDir tmp;
  auto store = std::make_shared<TranscriptStore>(tmp.path());
  LlmRequest req{"mock", "hello", {}, Purpose::Formulation};
  store->save({request_hash(req), "mock", "formulation", "hello", {}, "world", ""});
  ReplayBackend replay(store);
  CHECK(replay.complete(req) == "world");
  req.prompt = "hello!";
  try {
    replay.complete(req);
    FAIL("expected ReplayMiss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ReplayMiss);
  }
}

TEST_CASE("recording wraps a live backend") {
  TempDir tmp;
  auto store = std::make_shared<TranscriptStore>(tmp.path());
  BackendConfig c;
  c.id = "echo";
  c.kind = BackendKind::Command;
  c.command = {"sh", "-c", "tr a-z A-Z"};
  auto backend = make_backend(c, Mode::Record, store);
  auto req = make_request(c, "shout", Purpose::Distillation);
  CHECK(backend->complete(req) == "SHOUT");
  CHECK(store->size() == 1);
  auto t = store->find(request_hash(req));
  REQUIRE(t);
  CHECK(t->purpose == "distillation");
  CHECK_FALSE(t->recorded_at.empty());

  auto reread = std::make_shared<TranscriptStore>(tmp.path());
  CHECK(reread->load() == 1);
  auto replay = make_backend(c, Mode::Replay, reread);
  CHECK(replay->complete(req) == "SHOUT");
  CHECK_THROWS_AS(make_backend(c, Mode::Replay, nullptr), Error);
}

TEST_CASE("command backend failures") {
  BackendConfig c;
  c.id = "bad";
  c.kind = BackendKind::Command;
  c.command = {"sh", "-c", "echo nope >&2; exit 3"};
  CommandBackend b(c);
  try {
    b.complete(make_request(c, "x", Purpose::Formulation));
    FAIL("expected BackendUnavailable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BackendUnavailable);
    CHECK(e.detail() == "nope\n");
  }
  c.command = {"/nonexistent/llm"};
  CHECK_THROWS_AS(CommandBackend(c).complete(make_request(c, "x", Purpose::Formulation)), Error);
  c.command.clear();
  CHECK_THROWS_AS(CommandBackend{c}, Error);
}

TEST_CASE("names") {
  CHECK(api_key_env_var("my-model.v2") == "INTOPT_API_KEY_MY_MODEL_V2");
  CHECK(mode_from_string("replay") == Mode::Replay);
  CHECK_THROWS_AS(mode_from_string("dry"), Error);
  CHECK(backend_kind_from_string(to_string(BackendKind::RawCompletion)) == BackendKind::RawCompletion);
  CHECK_THROWS_AS(backend_kind_from_string("grpc"), Error);
  CHECK(to_string(Purpose::HarnessGeneration) == "harness_generation");
}

TEST_CASE("http request bodies") {
  auto c = http_config("http://127.0.0.1:1/v1/chat/completions");
  auto req = make_request(c, "hi", Purpose::Formulation);
  auto chat = nlohmann::json::parse(HttpBackend(c).request_body(req));
  CHECK(chat["model"] == "m1");
  CHECK(chat["messages"][0]["role"] == "user");
  CHECK(chat["messages"][0]["content"] == "hi");
  CHECK(chat["temperature"] == 0.0);
  CHECK(chat["max_tokens"] == 4096);
  c.kind = BackendKind::RawCompletion;
  auto raw = nlohmann::json::parse(HttpBackend(c).request_body(req));
  CHECK(raw["prompt"] == "hi");
  CHECK_FALSE(raw.contains("messages"));
}

TEST_CASE("http backend retries 429 and sends the key from the environment") {
  LocalServer srv;
  std::atomic<int> calls{0};
  std::string auth, body;
  srv.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (calls++ < 2) {
      res.status = 429;
      return;
    }
    auth = req.get_header_value("Authorization");
    body = req.body;
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"ok!"}}]})", "application/json");
  });
  srv.server.Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[{"text":"raw ok"}]})", "application/json");
  });
  srv.server.Post("/limited", [&](const httplib::Request&, httplib::Response& res) { res.status = 429; });
  srv.server.Post("/broken", [&](const httplib::Request&, httplib::Response& res) { res.set_content("[]", "text/plain"); });
  srv.start();

  test_support::EnvGuard key("INTOPT_API_KEY_LOCAL_TEST", std::string("sekrit"));
  auto c = http_config(srv.url("/v1/chat/completions"));
  HttpBackend chat(c);
  CHECK(chat.complete(make_request(c, "hello", Purpose::Formulation)) == "ok!");
  CHECK(calls == 3);
  CHECK(auth == "Bearer sekrit");
  CHECK(nlohmann::json::parse(body)["messages"][0]["content"] == "hello");

  auto raw_cfg = http_config(srv.url("/v1/completions"), BackendKind::RawCompletion);
  CHECK(HttpBackend(raw_cfg).complete(make_request(raw_cfg, "x", Purpose::Formulation)) == "raw ok");

  auto limited = http_config(srv.url("/limited"));
  try {
    HttpBackend(limited).complete(make_request(limited, "x", Purpose::Formulation));
    FAIL("expected RateLimited");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RateLimited);
  }

  auto broken = http_config(srv.url("/broken"));
  CHECK_THROWS_AS(HttpBackend(broken).complete(make_request(broken, "x", Purpose::Formulation)), Error);

  auto missing = http_config(srv.url("/nowhere"));
  CHECK_THROWS_AS(HttpBackend(missing).complete(make_request(missing, "x", Purpose::Formulation)), Error);
}

TEST_CASE("http backend reports an unreachable endpoint") {
  auto c = http_config("http://127.0.0.1:9/x");
  try {
    HttpBackend(c).complete(make_request(c, "x", Purpose::Formulation));
    FAIL("expected BackendUnavailable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BackendUnavailable);
  }
  auto bad = http_config("ftp://example");
  CHECK_THROWS_AS(HttpBackend(bad).complete(make_request(bad, "x", Purpose::Formulation)), Error);
}
