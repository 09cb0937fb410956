#pragma once

#include "intopt/config.hpp"
#include "intopt/report.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace intopt::batch {

// One IR path per line; blank lines and '#' comments are ignored, relative
// paths resolve against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest);

struct BatchOptions {
  std::filesystem::path results = "results.jsonl";
  bool resume = false;
  std::optional<std::filesystem::path> out_dir;  // optimized IR and strategies per program
};

struct BatchSummary {
  int total = 0;
  int resumed = 0;  // already present in results.jsonl
  int ok = 0;
  int failed = 0;
};

// optimize -> verify -> bench (when equivalent) for each program. Per-program
// failures are recorded, never fatal; ConfigError is thrown before any work.
// Records are appended in manifest order.
BatchSummary run_batch(const std::vector<std::filesystem::path>& programs, const PipelineConfig& config,
                       const BatchOptions& options);

}  // namespace intopt::batch
