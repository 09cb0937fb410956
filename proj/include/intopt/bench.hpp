#pragma once

#include "intopt/toolchain.hpp"
#include "intopt/verification.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace intopt::bench {

constexpr int kDefaultWarmupIters = 1000;
// Driver default when the binary is run by hand; run_bench always passes the
// configured count (kDefaultTimedIters) explicitly.
constexpr long long kDriverDefaultIters = 1'000'000;
constexpr long long kDefaultTimedIters = 10'000;

struct BenchHarness {
  std::string source;
  std::vector<std::pair<std::string, std::string>> timed_pairs;
  int warmup_iters = kDefaultWarmupIters;
  long long timed_iters = kDriverDefaultIters;
};

// Rewrites a fuzz harness into a standalone microbenchmark: the entry point
// becomes decode_input, each base/opt call is timed into its own accumulators
// and folded into a volatile sink, and a corpus-reading main is appended.
// Throws TransformFailure.
BenchHarness fuzz_to_bench(const verify::FuzzHarness& harness, int warmup_iters = kDefaultWarmupIters);

struct PerfRecord {
  std::string program_id;
  bool correct = false;
  double avg_ns_base = 0.0;
  double avg_ns_opt = 0.0;
  double speedup = 0.0;
  long long inputs_used = 0;
  long long iters = 0;
  int warmup_iters = kDefaultWarmupIters;
  std::string clock;  // "monotonic_raw" or "monotonic"
};

// base / opt when correct and opt > 0, otherwise 0.
double speedup(bool correct, double avg_ns_base, double avg_ns_opt);

// Recomputes the speedup field from the other fields.
PerfRecord finalize(PerfRecord record);

struct BenchOutput {
  long long calls_base = 0;
  long long calls_opt = 0;
  double avg_ns_base = 0.0;
  double avg_ns_opt = 0.0;
  std::string clock;
};

// Parses the driver's stdout; with several timed pairs their totals are summed.
BenchOutput parse_bench_output(const std::string& stdout_text);

// Compiles the merged IR with the benchmark source (no sanitizers).
std::filesystem::path build_bench(const IrProgram& merged, const BenchHarness& bench,
                                  const ToolchainConfig& toolchain, const std::filesystem::path& workdir,
                                  const verify::BuildOptions& options = {});

// Runs the benchmark once per corpus file, one benchmark at a time per
// process. Averages are weighted by call counts; inputs_used counts files that
// produced at least one timed call. Throws EmptyCorpus or RunFailure.
PerfRecord run_bench(const std::filesystem::path& binary, const std::filesystem::path& corpus_dir,
                     long long timed_iters = kDefaultTimedIters);

std::string perf_to_json(const PerfRecord& record, int indent = 2);

}  // namespace intopt::bench
