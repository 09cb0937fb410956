#pragma once

#include "intopt/bench.hpp"
#include "intopt/verification.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace intopt::report {

inline const std::vector<double> kThresholds = {1.1, 1.5, 2.0};

// One line of results.jsonl: the program's verdict and perf record plus the
// error that stopped it, if any.
struct ResultRecord {
  std::string program_id;
  std::string status = "ok";  // "ok" or an error kind name
  std::string error;
  std::string mode;            // "pipeline" or "baseline"
  std::vector<std::string> analyses;
  std::string optimized_sha256;
  std::string optimized_validity;
  verify::VerificationVerdict verdict;
  bench::PerfRecord perf;
};

std::string record_to_jsonl(const ResultRecord& record);
ResultRecord record_from_json(std::string_view line);
// Blank lines are ignored; malformed lines throw ParseError naming the line.
std::vector<ResultRecord> load_results(const std::filesystem::path& path);

struct Bucket {
  int count = 0;
  double fraction = 0.0;
};

struct EvaluationReport {
  int n_programs = 0;
  int correct_alive2 = 0;
  int correct_combined = 0;
  double correctness_alive2 = 0.0;
  double correctness_combined = 0.0;
  double avg_speedup = 0.0;  // arithmetic mean, zeros included
  std::map<double, Bucket> bucket_counts;
  std::vector<bench::PerfRecord> per_program;
};

struct KeyedVerdict {
  std::string program_id;
  verify::VerificationVerdict verdict;
};

// Records and verdicts must cover the same program ids (KeyMismatch
// otherwise). A program counts as correct only with an equivalent verdict;
// the speedup of every other program is taken as 0.
EvaluationReport aggregate(const std::vector<bench::PerfRecord>& records, const std::vector<KeyedVerdict>& verdicts);
EvaluationReport aggregate(const std::vector<ResultRecord>& results);

struct Band {
  double low = 0.98;
  double high = 1.02;
};

enum class Outcome { Win, Tie, Loss };

// Inclusive band: ratios equal to either endpoint are ties.
Outcome classify_ratio(double ratio, Band band = {});

struct PairwiseResult {
  int wins = 0;    // first side faster
  int ties = 0;
  int losses = 0;  // second side faster
  std::vector<std::pair<std::string, double>> ratios;  // program id, a/b speedup ratio
};

// Per program, ratio = speedup_a / speedup_b. A side with speedup 0 (incorrect)
// loses to any correct side; two zeros tie. Throws KeyMismatch.
PairwiseResult compare_pairwise(const std::vector<bench::PerfRecord>& a, const std::vector<bench::PerfRecord>& b,
                                Band band = {});

// "90.5% (181)"
std::string format_percent(int count, int n);
// "2.660x"
std::string format_speedup(double value);

std::string render_markdown(const EvaluationReport& report, const std::string& label = "results");
std::string render_json(const EvaluationReport& report, int indent = 2);
std::string render_pairwise_markdown(const PairwiseResult& result, const std::string& a_label,
                                     const std::string& b_label, Band band);
std::string render_pairwise_json(const PairwiseResult& result, Band band, int indent = 2);
// program_id,method,status,correct,avg_ns_base,avg_ns_opt,speedup
std::string render_csv(const std::vector<ResultRecord>& results);

}  // namespace intopt::report
