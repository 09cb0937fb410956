#pragma once

#include "intopt/ir_corpus.hpp"
#include "intopt/toolchain.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace intopt::analysis {

enum class IrUnitScope { Function, Module, Loop };

struct PrintPass {
  std::string pass;  // e.g. "print<domtree>"
  IrUnitScope scope = IrUnitScope::Function;
};

// Analysis class name -> `opt -p=` printer pass.
class AnalysisNameMap {
 public:
  static AnalysisNameMap builtin();
  // JSON object {analysis_id: print_pass_string}. Entries extend/override the
  // built-in defaults unless `replace` is set.
  static AnalysisNameMap from_json(std::string_view json_text, bool replace = false);
  static AnalysisNameMap load(const std::filesystem::path& path, bool replace = false);

  const PrintPass* find(const std::string& analysis_id) const;
  const std::map<std::string, PrintPass>& entries() const { return entries_; }

  // Drops entries whose pass name does not appear in `opt --print-passes`
  // output; returns the dropped analysis ids. No-op when opt is unavailable.
  std::vector<std::string> validate_against(const ToolchainConfig& toolchain);

  void set(const std::string& analysis_id, PrintPass pass) { entries_[analysis_id] = std::move(pass); }

 private:
  std::map<std::string, PrintPass> entries_;
};

enum class ItemStatus { Ok, Skipped, ToolFailure, Timeout };

std::string_view to_string(ItemStatus status);

struct AnalysisItem {
  std::string analysis_id;
  std::string print_pass;  // empty when skipped
  IrUnitScope scope = IrUnitScope::Function;
  std::string payload;     // verbatim stdout followed by stderr
  std::string streams;     // which streams contributed: "stderr", "stdout", "stdout+stderr", ""
  ItemStatus status = ItemStatus::Ok;
  int exit_code = 0;
};

struct AnalysisBundle {
  std::string for_program;
  std::vector<AnalysisItem> items;  // ordered by analysis id
};

struct CollectOptions {
  std::chrono::milliseconds timeout{30'000};
  bool parallel = true;
};

AnalysisBundle collect_analysis(const IrProgram& program, const std::set<std::string>& analyses,
                                const AnalysisNameMap& name_map, const ToolchainConfig& toolchain,
                                const CollectOptions& options = {});

// Text for the prompt's analysis slot. Empty bundle -> empty string.
std::string render_bundle(const AnalysisBundle& bundle);

}  // namespace intopt::analysis
