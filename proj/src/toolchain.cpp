#include "intopt/toolchain.hpp"

#include "intopt/error.hpp"
#include "intopt/process.hpp"

#include <array>
#include <cstdlib>
#include <vector>

namespace fs = std::filesystem;

namespace intopt {
namespace {

const std::optional<fs::path>& configured(const ToolchainConfig& tc, Tool tool) {
  switch (tool) {
    case Tool::Opt: return tc.opt;
    case Tool::Llc: return tc.llc;
    case Tool::ClangXX: return tc.clangxx;
    case Tool::AliveTv: return tc.alive_tv;
  }
  return tc.opt;
}

std::vector<std::string> default_names(Tool tool) {
  switch (tool) {
    case Tool::Opt: return {"opt", "opt-19"};
    case Tool::Llc: return {"llc", "llc-19"};
    case Tool::ClangXX: return {"clang++", "clang++-19"};
    case Tool::AliveTv: return {"alive-tv"};
  }
  return {};
}

}  // namespace

std::string_view tool_name(Tool tool) {
  switch (tool) {
    case Tool::Opt: return "opt";
    case Tool::Llc: return "llc";
    case Tool::ClangXX: return "clang++";
    case Tool::AliveTv: return "alive-tv";
  }
  return "?";
}

std::string_view tool_env_var(Tool tool) {
  switch (tool) {
    case Tool::Opt: return "INTOPT_OPT";
    case Tool::Llc: return "INTOPT_LLC";
    case Tool::ClangXX: return "INTOPT_CLANGXX";
    case Tool::AliveTv: return "INTOPT_ALIVE_TV";
  }
  return "";
}

std::optional<fs::path> ToolchainConfig::find(Tool tool) const {
  if (const char* env = std::getenv(std::string(tool_env_var(tool)).c_str()); env && *env)
    return find_on_path(env);
  if (const auto& path = configured(*this, tool)) return find_on_path(path->string());
  if (!search_path) return std::nullopt;
  for (const auto& name : default_names(tool))
    if (auto found = find_on_path(name)) return found;
  return std::nullopt;
}

fs::path ToolchainConfig::resolve(Tool tool) const {
  if (auto path = find(tool)) return *path;
  throw Error(ErrorKind::ToolMissing, std::string(tool_name(tool)) + " not found (set " +
                                          std::string(tool_env_var(tool)) + " or configure its path)");
}

}  // namespace intopt
