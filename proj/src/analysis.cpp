#include "intopt/analysis.hpp"

#include "intopt/error.hpp"
#include "intopt/log.hpp"
#include "intopt/process.hpp"

#include <json.hpp>

#include <future>
#include <sstream>

namespace fs = std::filesystem;

namespace intopt::analysis {
namespace {

IrUnitScope scope_for(std::string_view pass) {
  static const std::set<std::string_view> module_level = {
      "print-callgraph", "print-callgraph-sccs", "print-lcg", "print-lcg-dot", "print<stack-safety>",
      "print<module-debuginfo>", "print<inline-advisor>", "print-ir-similarity",
  };
  return module_level.contains(pass) ? IrUnitScope::Module : IrUnitScope::Function;
}

std::string_view scope_name(IrUnitScope scope) {
  switch (scope) {
    case IrUnitScope::Function: return "function";
    case IrUnitScope::Module: return "module";
    case IrUnitScope::Loop: return "loop";
  }
  return "function";
}

}  // namespace

std::string_view to_string(ItemStatus status) {
  switch (status) {
    case ItemStatus::Ok: return "ok";
    case ItemStatus::Skipped: return "skipped";
    case ItemStatus::ToolFailure: return "tool_failure";
    case ItemStatus::Timeout: return "timeout";
  }
  return "ok";
}

AnalysisNameMap AnalysisNameMap::builtin() {
  AnalysisNameMap map;
  const std::pair<const char*, const char*> defaults[] = {
      {"AAManager", "aa-eval"},
      {"AssumptionAnalysis", "print<assumptions>"},
      {"BlockFrequencyAnalysis", "print<block-freq>"},
      {"BranchProbabilityAnalysis", "print<branch-prob>"},
      {"CallGraphAnalysis", "print-callgraph"},
      {"CycleAnalysis", "print<cycles>"},
      {"DemandedBitsAnalysis", "print<demanded-bits>"},
      {"DependenceAnalysis", "print<da>"},
      {"DominanceFrontierAnalysis", "print<domfrontier>"},
      {"DominatorTreeAnalysis", "print<domtree>"},
      {"LazyCallGraphAnalysis", "print-lcg"},
      {"LazyValueAnalysis", "print<lazy-value-info>"},
      {"LoopAccessAnalysis", "print<access-info>"},
      {"LoopAnalysis", "print<loops>"},
      {"MemorySSAAnalysis", "print<memoryssa>"},
      {"PhiValuesAnalysis", "print<phi-values>"},
      {"PostDominatorTreeAnalysis", "print<postdomtree>"},
      {"RegionInfoAnalysis", "print<regions>"},
      {"ScalarEvolutionAnalysis", "print<scalar-evolution>"},
      {"StackSafetyGlobalAnalysis", "print<stack-safety>"},
      {"TargetIRAnalysis", "print<cost-model>"},
      {"UniformityInfoAnalysis", "print<uniformity>"},
  };
  for (const auto& [id, pass] : defaults) map.entries_[id] = {pass, scope_for(pass)};
  return map;
}

AnalysisNameMap AnalysisNameMap::from_json(std::string_view json_text, bool replace) {
  AnalysisNameMap map = replace ? AnalysisNameMap{} : builtin();
  try {
    auto doc = nlohmann::json::parse(json_text);
    if (!doc.is_object()) throw Error(ErrorKind::ParseError, "analysis name map must be a JSON object");
    for (const auto& [id, value] : doc.items()) {
      auto pass = value.get<std::string>();
      if (pass.empty()) map.entries_.erase(id);
      else map.entries_[id] = {pass, scope_for(pass)};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed analysis name map: ") + e.what());
  }
  return map;
}

AnalysisNameMap AnalysisNameMap::load(const fs::path& path, bool replace) { return from_json(read_file(path), replace); }

const PrintPass* AnalysisNameMap::find(const std::string& analysis_id) const {
  auto it = entries_.find(analysis_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> AnalysisNameMap::validate_against(const ToolchainConfig& toolchain) {
  auto opt = toolchain.find(Tool::Opt);
  if (!opt) return {};
  auto result = run_process({opt->string(), "--print-passes"});
  if (!result.ok()) return {};
  std::set<std::string> known;
  std::istringstream lines(result.out);
  for (std::string line; std::getline(lines, line);) {
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    known.insert(line.substr(b, e - b + 1));
  }
  std::vector<std::string> dropped;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (!known.contains(it->second.pass)) {
      log::warning("analysis map: '" + it->second.pass + "' for " + it->first + " not accepted by opt; dropping");
      dropped.push_back(it->first);
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  return dropped;
}

AnalysisBundle collect_analysis(const IrProgram& program, const std::set<std::string>& analyses,
                                const AnalysisNameMap& name_map, const ToolchainConfig& toolchain,
                                const CollectOptions& options) {
  AnalysisBundle bundle;
  bundle.for_program = program.id;
  if (analyses.empty()) return bundle;

  std::optional<fs::path> opt;
  bool any_mapped = false;
  for (const auto& id : analyses) any_mapped = any_mapped || name_map.find(id);
  if (any_mapped) opt = toolchain.resolve(Tool::Opt);

  TempDir dir("intopt-analysis");
  auto input = dir.path() / (program.id.empty() ? "program.ll" : program.id + ".ll");
  write_file(input, program.text);

  auto run_one = [&](const std::string& id) {
    AnalysisItem item;
    item.analysis_id = id;
    const PrintPass* pass = name_map.find(id);
    if (!pass) {
      item.status = ItemStatus::Skipped;
      return item;
    }
    item.print_pass = pass->pass;
    item.scope = pass->scope;
    auto result = run_process({opt->string(), "-p=" + pass->pass, "-disable-output", input.string()},
                              {.timeout = options.timeout});
    item.exit_code = result.exit_code;
    item.payload = result.out + result.err;
    item.streams = !result.out.empty() && !result.err.empty() ? "stdout+stderr"
                   : !result.err.empty()                      ? "stderr"
                   : !result.out.empty()                      ? "stdout"
                                                              : "";
    if (result.timed_out) item.status = ItemStatus::Timeout;
    else if (!result.ok()) item.status = ItemStatus::ToolFailure;
    return item;
  };

  // std::set iteration fixes the analysis-id order regardless of completion order.
  if (options.parallel) {
    std::vector<std::future<AnalysisItem>> pending;
    for (const auto& id : analyses) pending.push_back(std::async(std::launch::async, run_one, id));
    for (auto& f : pending) bundle.items.push_back(f.get());
  } else {
    for (const auto& id : analyses) bundle.items.push_back(run_one(id));
  }
  return bundle;
}

std::string render_bundle(const AnalysisBundle& bundle) {
  std::string out;
  std::vector<std::string> omitted;
  for (const auto& item : bundle.items) {
    if (item.status != ItemStatus::Ok) {
      omitted.push_back(item.analysis_id + " (" + std::string(to_string(item.status)) + ")");
      continue;
    }
    if (!out.empty()) out += '\n';
    out += "; === " + item.analysis_id + " [" + item.print_pass + ", " + std::string(scope_name(item.scope)) +
           "] ===\n";
    std::string_view payload = item.payload;
    while (!payload.empty() && payload.back() == '\n') payload.remove_suffix(1);
    if (!payload.empty()) {
      out += payload;
      out += '\n';
    }
  }
  if (!omitted.empty()) {
    if (!out.empty()) out += '\n';
    out += "; omitted:";
    for (size_t i = 0; i < omitted.size(); ++i) out += (i ? ", " : " ") + omitted[i];
    out += '\n';
  }
  return out;
}

}  // namespace intopt::analysis
