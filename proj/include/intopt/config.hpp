#pragma once

#include "intopt/llm.hpp"
#include "intopt/toolchain.hpp"
#include "intopt/verification.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace intopt {

enum class OptimizeMode { Pipeline, Baseline };

std::string_view to_string(OptimizeMode mode);
OptimizeMode optimize_mode_from_string(std::string_view name);

struct PipelineConfig {
  ToolchainConfig toolchain;
  std::optional<std::filesystem::path> kb_path;
  std::optional<std::filesystem::path> analysis_map;  // JSON overrides for the analysis -> printer map
  bool analysis_map_replace = false;
  std::filesystem::path transcripts_dir = "transcripts";
  std::filesystem::path work_dir = "work";

  std::map<std::string, llm::BackendConfig> backends;
  std::string formulation_backend;
  std::string optimizer_backend;
  std::string harness_backend;
  llm::Mode llm_mode = llm::Mode::Live;
  OptimizeMode optimize_mode = OptimizeMode::Pipeline;

  int retrieval_m = 3;
  std::size_t token_cap = 5000;
  std::chrono::seconds analysis_timeout{30};

  long long fuzz_runs = 200'000;
  unsigned fuzz_seed = 1;
  std::chrono::seconds fuzz_budget{600};
  std::chrono::seconds alive_timeout{60};
  std::vector<std::string> alive_flags;
  verify::HarnessMode harness_mode = verify::HarnessMode::Template;

  bool bench_enabled = true;
  long long bench_iters = 10'000;
  int bench_warmup = 1000;

  int workers = 1;

  // Relative paths in the file resolve against the file's directory. Throws
  // ConfigError for unknown backend kinds, undefined backend references, and
  // configured paths that do not exist.
  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig parse(std::string_view toml_text, const std::filesystem::path& base_dir = ".");

  // Path from --config, else INTOPT_CONFIG, else none.
  static std::optional<std::filesystem::path> locate(const std::optional<std::filesystem::path>& cli_path);

  // ConfigError naming the missing backend id.
  const llm::BackendConfig& backend(const std::string& id) const;

  verify::VerifyConfig verify_config() const;
};

}  // namespace intopt
