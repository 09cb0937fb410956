#pragma once

#include "intopt/ir_corpus.hpp"
#include "intopt/llm.hpp"
#include "intopt/toolchain.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace intopt::verify {

enum class Method { Alive2, DiffTest, None };
enum class Status { Equivalent, Inequivalent, Alive2Timeout, Alive2Unsupported, FuzzCrash, BuildFailure, Skipped };

std::string_view to_string(Method method);
std::string_view to_string(Status status);
Method method_from_string(std::string_view name);
Status status_from_string(std::string_view name);

struct VerificationVerdict {
  Method method = Method::None;
  Status status = Status::Skipped;
  std::string detail;      // captured tool output
  std::string reason;      // short machine-readable code for skipped verdicts
  long long fuzz_runs_completed = 0;
  std::string reproducer;  // crashing input, for fuzz_crash

  bool equivalent() const { return status == Status::Equivalent; }
};

std::string verdict_to_json(const VerificationVerdict& verdict, int indent = 2);
VerificationVerdict verdict_from_json(std::string_view json_text);

enum class HarnessProvenance { LlmGenerated, Template };

struct FuzzHarness {
  std::string source;
  std::vector<std::pair<std::string, std::string>> function_pairs;  // (base, base + "_opt")
  HarnessProvenance provenance = HarnessProvenance::Template;
};

// ---- Alive2 ---------------------------------------------------------------

struct AliveOptions {
  std::chrono::seconds timeout{60};
  std::vector<std::string> flags;
};

// Interprets alive-tv output. Throws ToolFailure when the output carries no
// recognizable verdict and the tool did not exit cleanly.
VerificationVerdict parse_alive_output(const std::string& output, int exit_code);

// Skipped when alive-tv is not available.
VerificationVerdict alive_check(const IrPair& pair, const ToolchainConfig& toolchain, const AliveOptions& options = {});

// ---- differential testing -------------------------------------------------

// Reason code when the pair cannot be fuzzed in isolation (undeclared external
// functions beyond intrinsics and libm, or external globals); nullopt if eligible.
std::optional<std::string> diff_test_ineligibility(const IrPair& pair);

// One module defining both versions; optimized-side definitions get an `_opt`
// suffix. Throws SymbolClash.
IrProgram merge_for_diff(const IrPair& pair);

// (f, f_opt) for every public f in `merged` that has an f_opt definition.
std::vector<std::pair<std::string, std::string>> function_pairs(std::string_view merged_text);

// Scalar-only template harness. Throws UnsupportedSignature.
FuzzHarness template_harness(const IrProgram& merged);

// Prompts `backend` with the merged IR. Throws NoCodeRegion.
FuzzHarness llm_harness(const IrProgram& merged, llm::Backend& backend, const llm::BackendConfig& config);

// The C++ source inside a harness response: a fenced block or <code> region if
// present, otherwise the response itself. Throws NoCodeRegion when there is no
// fuzzer entry point.
std::string extract_harness_source(std::string_view response);

struct BuildOptions {
  std::vector<std::string> llc_flags = {"-O2"};
  std::vector<std::string> link_flags = {"-fsanitize=fuzzer,address,undefined"};
  // When llc is unavailable, run codegen through clang with IR passes disabled.
  bool allow_clang_codegen = true;
  std::chrono::seconds timeout{300};
};

// Writes merged.ll and fuzz.cc into `workdir`, builds `workdir/fuzzer`.
// Throws BuildFailure with the compiler output as detail.
std::filesystem::path build_fuzzer(const IrProgram& merged, const FuzzHarness& harness,
                                   const ToolchainConfig& toolchain, const std::filesystem::path& workdir,
                                   const BuildOptions& options = {});

// Compiles `ll_path` to an object or assembly file for linking.
std::filesystem::path compile_ir(const std::filesystem::path& ll_path, const ToolchainConfig& toolchain,
                                 const std::filesystem::path& out_dir, const BuildOptions& options,
                                 std::string* log = nullptr);

struct FuzzOptions {
  long long runs = 200'000;
  unsigned seed = 1;
  std::chrono::seconds wall_budget{600};
  int per_input_timeout_s = 10;
};

// Runs the fuzzer over `corpus_dir` (created if needed); crash artifacts land
// next to the binary. Throws RunFailure when the binary does not exist.
VerificationVerdict run_diff_fuzz(const std::filesystem::path& binary, const std::filesystem::path& corpus_dir,
                                  const FuzzOptions& options = {});

// True when running `binary` on `input` crashes again.
bool replay_reproducer(const std::filesystem::path& binary, const std::filesystem::path& input);

enum class HarnessMode { Template, Llm };

struct VerifyConfig {
  ToolchainConfig toolchain;
  AliveOptions alive;
  BuildOptions build;
  FuzzOptions fuzz;
  HarnessMode harness_mode = HarnessMode::Template;
  llm::Backend* harness_backend = nullptr;
  llm::BackendConfig harness_backend_config;
  std::filesystem::path work_root = "work";
  bool use_alive = true;
};

// Alive2 first; the differential pipeline runs when Alive2 is unavailable,
// times out, or reports an unsupported construct. Workspace:
// work_root/<pair id>/{merged.ll, fuzz.cc, fuzzer, corpus/, crash-*}.
VerificationVerdict verify(const IrPair& pair, const VerifyConfig& config);

std::filesystem::path workspace_for(const IrPair& pair, const VerifyConfig& config);

}  // namespace intopt::verify
