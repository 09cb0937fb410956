#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace intopt::kb {

enum class PassKind { Module, Function, Loop, LoopNest, Cgscc, MachineFunction };

struct RegisteredPass {
  std::string id;             // class name, e.g. LoopVectorizePass
  std::string registry_name;  // pipeline name, e.g. loop-vectorize
  PassKind kind = PassKind::Function;
  bool analysis = false;
};

struct RegistryScan {
  std::vector<RegisteredPass> transforms;  // deduplicated by id, source order
  std::vector<RegisteredPass> analyses;

  std::set<std::string> analysis_ids() const;
};

// Scans the PassRegistry.def macro list. Throws ParseError when no macro entry
// is recognized at all.
RegistryScan extract_pass_registry(std::string_view registry_source);

struct Evidence {
  std::string file;  // relative to the scan root's parent tree
  int line = 0;

  auto operator<=>(const Evidence&) const = default;
};

struct DepEvidence {
  std::string analysis;
  Evidence where;
  bool cached = false;  // getCachedResult<T>
};

struct DepScan {
  std::set<std::string> deps;
  std::vector<DepEvidence> evidence;  // getResult and getCachedResult sites
  std::vector<std::string> files;     // implementation files that were scanned
  std::vector<std::string> warnings;
};

struct DepScanOptions {
  bool include_cached = false;
  // Names accepted as analyses besides the *Analysis suffix rule.
  std::set<std::string> analysis_registry;
  // Evidence paths are made relative to this directory when set.
  std::optional<std::filesystem::path> relative_to;
};

// Lexical scan for `getResult<T>` in the files implementing `pass_id` under
// `transforms_root`. Throws SourceNotFound when no file matches.
DepScan extract_deps(std::string_view pass_id, const std::filesystem::path& transforms_root,
                     const DepScanOptions& options = {});

// Strips template arguments and namespaces: `llvm::LoopAnalysis` -> `LoopAnalysis`.
std::string normalize_analysis_name(std::string_view raw);

// Maps each pass to its documentation paragraph; passes missing from the docs
// get a description synthesized from their registry name and class name.
std::map<std::string, std::string> attach_descriptions(const std::vector<RegisteredPass>& passes,
                                                       std::string_view docs_source);

std::string fallback_description(const RegisteredPass& pass);

struct PassEntry {
  std::string id;
  std::string desc;
  std::set<std::string> deps;
  std::vector<Evidence> source_locations;

  bool operator==(const PassEntry&) const = default;
};

struct KnowledgeBase {
  std::map<std::string, PassEntry> entries;
  std::string llvm_version;
  std::string built_at;

  bool operator==(const KnowledgeBase&) const = default;

  const PassEntry* find(std::string_view id) const;
};

struct BuildOptions {
  std::string built_at;  // ISO-8601; the CLI fills it from SOURCE_DATE_EPOCH or the clock
  bool include_cached = false;
};

// `llvm_source_root` is the `llvm/` directory (lib/Passes/PassRegistry.def,
// lib/Transforms/...). Throws ParseError, IoError or BuildEmpty.
KnowledgeBase build_kb(const std::filesystem::path& llvm_source_root, std::string_view docs_source,
                       const BuildOptions& options = {});

std::string serialize(const KnowledgeBase& kb);
KnowledgeBase deserialize(std::string_view json_text);

KnowledgeBase load_kb(const std::filesystem::path& path);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);

}  // namespace intopt::kb
