#include "intopt/llm.hpp"

#include "intopt/error.hpp"
#include "intopt/log.hpp"
#include "intopt/process.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cctype>
#include <chrono>
#include <ctime>
#include <regex>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace intopt::llm {
namespace {

std::string utc_now_iso() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json transcript_to_json(const LlmTranscript& t) {
  nlohmann::ordered_json doc;
  doc["request_hash"] = t.request_hash;
  doc["backend_id"] = t.backend_id;
  doc["purpose"] = t.purpose;
  doc["sampling"] = {{"temperature", t.sampling.temperature}, {"max_output_tokens", t.sampling.max_output_tokens}};
  doc["prompt"] = t.prompt;
  doc["response"] = t.response;
  doc["recorded_at"] = t.recorded_at;
  return json::parse(doc.dump());
}

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorKind::ConfigError, "invalid backend endpoint: " + url);
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

std::string_view to_string(Purpose purpose) {
  switch (purpose) {
    case Purpose::Formulation: return "formulation";
    case Purpose::Refinement: return "refinement";
    case Purpose::Realization: return "realization";
    case Purpose::Distillation: return "distillation";
    case Purpose::HarnessGeneration: return "harness_generation";
  }
  return "formulation";
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::OpenAiChat: return "openai_chat";
    case BackendKind::RawCompletion: return "raw_completion";
    case BackendKind::Command: return "command";
    case BackendKind::Replay: return "replay";
  }
  return "openai_chat";
}

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "openai_chat") return BackendKind::OpenAiChat;
  if (name == "raw_completion") return BackendKind::RawCompletion;
  if (name == "command") return BackendKind::Command;
  if (name == "replay") return BackendKind::Replay;
  throw Error(ErrorKind::ConfigError, "unknown backend kind: " + std::string(name));
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Live: return "live";
    case Mode::Record: return "record";
    case Mode::Replay: return "replay";
  }
  return "live";
}

Mode mode_from_string(std::string_view name) {
  if (name == "live") return Mode::Live;
  if (name == "record") return Mode::Record;
  if (name == "replay") return Mode::Replay;
  throw Error(ErrorKind::ConfigError, "unknown backend mode: " + std::string(name));
}

std::string request_hash(const LlmRequest& request) {
  // Fixed key order and number formatting keep the digest stable.
  nlohmann::ordered_json canon;
  canon["backend_id"] = request.backend_id;
  canon["prompt"] = request.prompt;
  canon["sampling"] = {{"temperature", request.sampling.temperature},
                       {"max_output_tokens", request.sampling.max_output_tokens}};
  return sha256_hex(canon.dump());
}

LlmRequest make_request(const BackendConfig& config, std::string prompt, Purpose purpose) {
  return {config.id, std::move(prompt), config.sampling, purpose};
}

std::string api_key_env_var(std::string_view backend_id) {
  std::string name = "INTOPT_API_KEY_";
  for (char c : backend_id)
    name.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                                                                : '_');
  return name;
}

// ---- TranscriptStore -------------------------------------------------------

TranscriptStore::TranscriptStore(fs::path directory) : directory_(std::move(directory)) {}

std::size_t TranscriptStore::load() {
  std::map<std::string, LlmTranscript> loaded;
  std::error_code ec;
  if (fs::is_directory(directory_, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory_))
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      try {
        auto doc = json::parse(read_file(file));
        LlmTranscript t;
        t.request_hash = doc.at("request_hash").get<std::string>();
        t.backend_id = doc.value("backend_id", std::string());
        t.purpose = doc.value("purpose", std::string());
        t.prompt = doc.value("prompt", std::string());
        if (doc.contains("sampling")) {
          t.sampling.temperature = doc["sampling"].value("temperature", 0.0);
          t.sampling.max_output_tokens = doc["sampling"].value("max_output_tokens", 0);
        }
        t.response = doc.at("response").get<std::string>();
        t.recorded_at = doc.value("recorded_at", std::string());
        if (file.stem().string() != t.request_hash)
          throw Error(ErrorKind::ParseError, "file name does not match request_hash");
        loaded.emplace(t.request_hash, std::move(t));
      } catch (const std::exception& e) {
        log::warning("transcript store: skipping " + file.string() + ": " + e.what());
      }
    }
  }
  std::unique_lock lock(mutex_);
  transcripts_ = std::move(loaded);
  return transcripts_.size();
}

std::optional<LlmTranscript> TranscriptStore::find(const std::string& hash) const {
  std::shared_lock lock(mutex_);
  auto it = transcripts_.find(hash);
  if (it == transcripts_.end()) return std::nullopt;
  return it->second;
}

void TranscriptStore::save(const LlmTranscript& transcript) {
  std::unique_lock lock(mutex_);
  fs::create_directories(directory_);
  auto final_path = directory_ / (transcript.request_hash + ".json");
  auto tmp_path = directory_ / (transcript.request_hash + ".json.tmp");
  write_file(tmp_path, transcript_to_json(transcript).dump(2) + "\n");
  fs::rename(tmp_path, final_path);
  transcripts_[transcript.request_hash] = transcript;
}

std::size_t TranscriptStore::size() const {
  std::shared_lock lock(mutex_);
  return transcripts_.size();
}

// ---- Backends --------------------------------------------------------------

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  if (config_.kind != BackendKind::OpenAiChat && config_.kind != BackendKind::RawCompletion)
    throw Error(ErrorKind::ConfigError, "HttpBackend needs an HTTP backend kind");
}

std::string HttpBackend::request_body(const LlmRequest& request) const {
  json body;
  body["model"] = config_.model;
  body["temperature"] = request.sampling.temperature;
  body["max_tokens"] = request.sampling.max_output_tokens;
  if (config_.kind == BackendKind::OpenAiChat)
    body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt}}});
  else
    body["prompt"] = request.prompt;
  return body.dump();
}

std::string HttpBackend::complete(const LlmRequest& request) {
  auto endpoint = split_endpoint(config_.endpoint);
  httplib::Client client(endpoint.scheme_host_port);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  client.set_connection_timeout(std::chrono::seconds(30));
  httplib::Headers headers;
  if (const char* key = std::getenv(api_key_env_var(config_.id).c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const std::string body = request_body(request);
  auto backoff = config_.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    auto res = client.Post(endpoint.path, headers, body, "application/json");
    if (!res)
      throw Error(ErrorKind::BackendUnavailable,
                  config_.id + ": " + httplib::to_string(res.error()) + " (" + config_.endpoint + ")");
    if (res->status == 429) {
      if (attempt >= config_.max_retries)
        throw Error(ErrorKind::RateLimited, config_.id + ": still rate limited after " +
                                                std::to_string(attempt) + " retries",
                    res->body);
      log::info(config_.id + ": rate limited, retrying in " + std::to_string(backoff.count()) + " ms");
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, config_.max_backoff);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorKind::BackendUnavailable, config_.id + ": HTTP " + std::to_string(res->status), res->body);
    try {
      auto doc = json::parse(res->body);
      const auto& choice = doc.at("choices").at(0);
      if (config_.kind == BackendKind::OpenAiChat) return choice.at("message").at("content").get<std::string>();
      return choice.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::BackendUnavailable, config_.id + ": unexpected response shape: " + e.what(), res->body);
    }
  }
}

CommandBackend::CommandBackend(BackendConfig config) : config_(std::move(config)) {
  if (config_.command.empty()) throw Error(ErrorKind::ConfigError, config_.id + ": command backend needs a command");
}

std::string CommandBackend::complete(const LlmRequest& request) {
  ProcessResult result;
  try {
    result = run_process(config_.command, {.stdin_text = request.prompt,
                                           .timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
                                               config_.timeout)});
  } catch (const Error& e) {
    throw Error(ErrorKind::BackendUnavailable, config_.id + ": " + e.what());
  }
  if (!result.ok())
    throw Error(ErrorKind::BackendUnavailable, config_.id + ": command exited with " + std::to_string(result.exit_code),
                result.err);
  return result.out;
}

std::string ReplayBackend::complete(const LlmRequest& request) {
  auto hash = request_hash(request);
  auto transcript = store_->find(hash);
  if (!transcript)
    throw Error(ErrorKind::ReplayMiss, "no transcript for " + std::string(to_string(request.purpose)) +
                                           " request " + hash + " (backend " + request.backend_id + ")");
  return transcript->response;
}

std::string RecordingBackend::complete(const LlmRequest& request) {
  std::string response = inner_->complete(request);
  LlmTranscript t;
  t.request_hash = request_hash(request);
  t.backend_id = request.backend_id;
  t.purpose = std::string(to_string(request.purpose));
  t.prompt = request.prompt;
  t.sampling = request.sampling;
  t.response = response;
  t.recorded_at = utc_now_iso();
  store_->save(t);
  return response;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config, Mode mode, std::shared_ptr<TranscriptStore> store) {
  if (mode == Mode::Replay || config.kind == BackendKind::Replay) {
    if (!store) throw Error(ErrorKind::ConfigError, "replay mode needs a transcript store");
    return std::make_unique<ReplayBackend>(std::move(store));
  }
  std::unique_ptr<Backend> live;
  if (config.kind == BackendKind::Command) live = std::make_unique<CommandBackend>(config);
  else live = std::make_unique<HttpBackend>(config);
  if (mode == Mode::Record) {
    if (!store) throw Error(ErrorKind::ConfigError, "record mode needs a transcript store");
    return std::make_unique<RecordingBackend>(std::move(live), std::move(store));
  }
  return live;
}

}  // namespace intopt::llm
