#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace intopt {

enum class Tool { Opt, Llc, ClangXX, AliveTv };

std::string_view tool_name(Tool tool);
// Environment variable that overrides the configured path of `tool`.
std::string_view tool_env_var(Tool tool);

// Paths to the external LLVM binaries. Resolution order for each tool:
// environment override, configured path, then a PATH search for the
// conventional names (disabled with search_path = false).
struct ToolchainConfig {
  std::optional<std::filesystem::path> opt;
  std::optional<std::filesystem::path> llc;
  std::optional<std::filesystem::path> clangxx;
  std::optional<std::filesystem::path> alive_tv;
  bool search_path = true;

  std::optional<std::filesystem::path> find(Tool tool) const;
  // Throws Error{ToolMissing}.
  std::filesystem::path resolve(Tool tool) const;
  bool has(Tool tool) const { return find(tool).has_value(); }
};

}  // namespace intopt
