#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace intopt::llm {

enum class Purpose { Formulation, Refinement, Realization, Distillation, HarnessGeneration };

std::string_view to_string(Purpose purpose);

struct Sampling {
  double temperature = 0.0;
  int max_output_tokens = 4096;

  bool operator==(const Sampling&) const = default;
};

struct LlmRequest {
  std::string backend_id;
  std::string prompt;
  Sampling sampling;
  Purpose purpose = Purpose::Formulation;
};

// SHA-256 over a canonical encoding of (backend_id, prompt, sampling).
std::string request_hash(const LlmRequest& request);

struct LlmTranscript {
  std::string request_hash;
  std::string backend_id;
  std::string purpose;
  std::string prompt;
  Sampling sampling;
  std::string response;
  std::string recorded_at;
};

// One JSON file per transcript, named <request_hash>.json. Writes are
// serialized; lookups after load() take a shared lock only.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path directory);

  // (Re)reads the directory. Corrupt files are skipped with a warning.
  // Returns the number of transcripts loaded.
  std::size_t load();
  std::optional<LlmTranscript> find(const std::string& hash) const;
  void save(const LlmTranscript& transcript);
  std::size_t size() const;
  const std::filesystem::path& directory() const { return directory_; }

 private:
  std::filesystem::path directory_;
  std::map<std::string, LlmTranscript> transcripts_;
  mutable std::shared_mutex mutex_;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
};

enum class BackendKind { OpenAiChat, RawCompletion, Command, Replay };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

struct BackendConfig {
  std::string id;
  BackendKind kind = BackendKind::OpenAiChat;
  std::string endpoint;              // full URL for HTTP kinds
  std::string model;
  std::vector<std::string> command;  // argv for the command kind; prompt on stdin
  Sampling sampling;
  int max_retries = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{30'000};
  std::chrono::seconds timeout{600};
};

// INTOPT_API_KEY_<ID>, with the id uppercased and non-alphanumerics as '_'.
std::string api_key_env_var(std::string_view backend_id);

// OpenAI-compatible chat completions or raw completions over HTTP(S).
// 429 responses are retried with exponential backoff up to max_retries, then
// surfaced as RateLimited.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);
  std::string complete(const LlmRequest& request) override;

  // Exposed for tests: the JSON body posted for `request`.
  std::string request_body(const LlmRequest& request) const;

 private:
  BackendConfig config_;
};

// Runs a local command with the prompt on stdin; stdout is the response.
class CommandBackend final : public Backend {
 public:
  explicit CommandBackend(BackendConfig config);
  std::string complete(const LlmRequest& request) override;

 private:
  BackendConfig config_;
};

class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(std::shared_ptr<const TranscriptStore> store) : store_(std::move(store)) {}
  std::string complete(const LlmRequest& request) override;

 private:
  std::shared_ptr<const TranscriptStore> store_;
};

class RecordingBackend final : public Backend {
 public:
  RecordingBackend(std::unique_ptr<Backend> inner, std::shared_ptr<TranscriptStore> store)
      : inner_(std::move(inner)), store_(std::move(store)) {}
  std::string complete(const LlmRequest& request) override;

 private:
  std::unique_ptr<Backend> inner_;
  std::shared_ptr<TranscriptStore> store_;
};

enum class Mode { Live, Record, Replay };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view name);

// Builds the backend for `config` under `mode`; record and replay need a store.
std::unique_ptr<Backend> make_backend(const BackendConfig& config, Mode mode,
                                      std::shared_ptr<TranscriptStore> store);

// Request with the backend's id and sampling filled in.
LlmRequest make_request(const BackendConfig& config, std::string prompt, Purpose purpose);

}  // namespace intopt::llm
