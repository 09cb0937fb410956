#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace intopt {

struct ProcessResult {
  int exit_code = -1;      // valid when !signaled && !timed_out
  int term_signal = 0;     // nonzero when killed by a signal
  bool timed_out = false;
  std::string out;
  std::string err;

  bool ok() const { return !timed_out && term_signal == 0 && exit_code == 0; }
};

struct ProcessOptions {
  std::optional<std::string> stdin_text;
  std::optional<std::chrono::milliseconds> timeout;
  std::optional<std::filesystem::path> cwd;
};

// Spawns argv[0] (resolved through PATH when it has no slash) and collects
// both output streams. Throws Error{ToolMissing} when the executable cannot
// be started.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

// Returns the absolute path of `name` on PATH, if any.
std::optional<std::filesystem::path> find_on_path(const std::string& name);

// Small filesystem helpers shared across modules.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view data);

// Self-deleting temporary directory.
class TempDir {
 public:
  explicit TempDir(std::string_view prefix = "intopt");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace intopt
