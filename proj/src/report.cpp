#include "intopt/report.hpp"

#include "intopt/error.hpp"
#include "intopt/process.hpp"

#include <json.hpp>

#include <cstdio>
#include <set>
#include <sstream>

namespace intopt::report {
namespace {

using ojson = nlohmann::ordered_json;

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string threshold_label(double t) { return fixed(t, 1); }

}  // namespace

std::string record_to_jsonl(const ResultRecord& r) {
  ojson doc;
  doc["program_id"] = r.program_id;
  doc["status"] = r.status;
  if (!r.error.empty()) doc["error"] = r.error;
  doc["mode"] = r.mode;
  doc["analyses"] = r.analyses;
  doc["optimized_sha256"] = r.optimized_sha256;
  doc["optimized_validity"] = r.optimized_validity;
  doc["verdict"] = ojson::parse(verify::verdict_to_json(r.verdict, -1));
  doc["perf"] = ojson::parse(bench::perf_to_json(r.perf, -1));
  return doc.dump();
}

ResultRecord record_from_json(std::string_view line) {
  try {
    auto doc = nlohmann::json::parse(line);
    ResultRecord r;
    r.program_id = doc.at("program_id").get<std::string>();
    r.status = doc.value("status", std::string("ok"));
    r.error = doc.value("error", std::string());
    r.mode = doc.value("mode", std::string());
    if (doc.contains("analyses")) r.analyses = doc["analyses"].get<std::vector<std::string>>();
    r.optimized_sha256 = doc.value("optimized_sha256", std::string());
    r.optimized_validity = doc.value("optimized_validity", std::string());
    if (doc.contains("verdict")) r.verdict = verify::verdict_from_json(doc["verdict"].dump());
    if (doc.contains("perf")) {
      const auto& p = doc["perf"];
      r.perf.program_id = p.value("program_id", r.program_id);
      r.perf.correct = p.value("correct", false);
      r.perf.avg_ns_base = p.value("avg_ns_base", 0.0);
      r.perf.avg_ns_opt = p.value("avg_ns_opt", 0.0);
      r.perf.speedup = p.value("speedup", 0.0);
      r.perf.inputs_used = p.value("inputs_used", 0LL);
      r.perf.iters = p.value("iters", 0LL);
      r.perf.warmup_iters = p.value("warmup_iters", bench::kDefaultWarmupIters);
      r.perf.clock = p.value("clock", std::string());
    }
    if (r.perf.program_id.empty()) r.perf.program_id = r.program_id;
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed result record: ") + e.what());
  }
}

std::vector<ResultRecord> load_results(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<ResultRecord> out;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const Error& e) {
      throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

EvaluationReport aggregate(const std::vector<bench::PerfRecord>& records, const std::vector<KeyedVerdict>& verdicts) {
  std::map<std::string, const verify::VerificationVerdict*> by_id;
  for (const auto& v : verdicts)
    if (!by_id.emplace(v.program_id, &v.verdict).second)
      throw Error(ErrorKind::KeyMismatch, "duplicate verdict for " + v.program_id);
  std::set<std::string> record_ids;
  for (const auto& r : records) {
    if (!record_ids.insert(r.program_id).second) throw Error(ErrorKind::KeyMismatch, "duplicate record for " + r.program_id);
    if (!by_id.contains(r.program_id)) throw Error(ErrorKind::KeyMismatch, "no verdict for " + r.program_id);
  }
  for (const auto& [id, _] : by_id)
    if (!record_ids.contains(id)) throw Error(ErrorKind::KeyMismatch, "no perf record for " + id);

  EvaluationReport report;
  report.n_programs = static_cast<int>(records.size());
  for (double t : kThresholds) report.bucket_counts[t] = {};
  double sum = 0.0;
  for (const auto& r : records) {
    const auto& verdict = *by_id.at(r.program_id);
    bench::PerfRecord effective = r;
    if (!verdict.equivalent()) effective.correct = false;
    if (!effective.correct) effective.speedup = 0.0;
    if (verdict.equivalent()) {
      ++report.correct_combined;
      if (verdict.method == verify::Method::Alive2) ++report.correct_alive2;
    }
    sum += effective.speedup;
    for (double t : kThresholds)
      if (effective.speedup > t) ++report.bucket_counts[t].count;
    report.per_program.push_back(effective);
  }
  if (report.n_programs > 0) {
    double n = report.n_programs;
    report.correctness_alive2 = report.correct_alive2 / n;
    report.correctness_combined = report.correct_combined / n;
    report.avg_speedup = sum / n;
    for (auto& [t, bucket] : report.bucket_counts) bucket.fraction = bucket.count / n;
  }
  return report;
}

EvaluationReport aggregate(const std::vector<ResultRecord>& results) {
  std::vector<bench::PerfRecord> records;
  std::vector<KeyedVerdict> verdicts;
  for (const auto& r : results) {
    auto perf = r.perf;
    perf.program_id = r.program_id;
    records.push_back(perf);
    verdicts.push_back({r.program_id, r.verdict});
  }
  return aggregate(records, verdicts);
}

Outcome classify_ratio(double ratio, Band band) {
  if (ratio < band.low) return Outcome::Loss;
  if (ratio > band.high) return Outcome::Win;
  return Outcome::Tie;
}

PairwiseResult compare_pairwise(const std::vector<bench::PerfRecord>& a, const std::vector<bench::PerfRecord>& b,
                                Band band) {
  if (band.low > band.high) throw Error(ErrorKind::Precondition, "equal band is empty");
  std::map<std::string, double> b_speedups;
  for (const auto& r : b) b_speedups[r.program_id] = r.correct ? r.speedup : 0.0;
  if (a.size() != b.size() || b_speedups.size() != b.size())
    throw Error(ErrorKind::KeyMismatch, "comparison needs the same program ids on both sides");
  PairwiseResult result;
  for (const auto& r : a) {
    auto it = b_speedups.find(r.program_id);
    if (it == b_speedups.end()) throw Error(ErrorKind::KeyMismatch, "program " + r.program_id + " missing on one side");
    double sa = r.correct ? r.speedup : 0.0, sb = it->second;
    Outcome outcome;
    double ratio;
    if (sa == 0.0 && sb == 0.0) {
      outcome = Outcome::Tie;
      ratio = 1.0;
    } else if (sb == 0.0) {
      outcome = Outcome::Win;
      ratio = std::numeric_limits<double>::infinity();
    } else {
      ratio = sa / sb;
      outcome = classify_ratio(ratio, band);
    }
    result.ratios.emplace_back(r.program_id, ratio);
    switch (outcome) {
      case Outcome::Win: ++result.wins; break;
      case Outcome::Tie: ++result.ties; break;
      case Outcome::Loss: ++result.losses; break;
    }
  }
  return result;
}

std::string format_percent(int count, int n) {
  double pct = n > 0 ? 100.0 * count / n : 0.0;
  return fixed(pct, 1) + "% (" + std::to_string(count) + ")";
}

std::string format_speedup(double value) { return fixed(value, 3) + "x"; }

std::string render_markdown(const EvaluationReport& r, const std::string& label) {
  std::string out;
  out += "| Method | Programs | Correct (Alive2) | Correct (combined) | Avg. Speedup";
  for (double t : kThresholds) out += " | Speedup > " + threshold_label(t) + "x";
  out += " |\n|---|---|---|---|---";
  for (size_t i = 0; i < kThresholds.size(); ++i) out += "|---";
  out += "|\n";
  out += "| " + label + " | " + std::to_string(r.n_programs) + " | " + format_percent(r.correct_alive2, r.n_programs) +
         " | " + format_percent(r.correct_combined, r.n_programs) + " | " + format_speedup(r.avg_speedup);
  for (double t : kThresholds) {
    auto it = r.bucket_counts.find(t);
    out += " | " + format_percent(it == r.bucket_counts.end() ? 0 : it->second.count, r.n_programs);
  }
  out += " |\n\nAvg. Speedup is the arithmetic mean over all programs; programs without an equivalent verdict "
         "count as 0.\n";
  return out;
}

std::string render_json(const EvaluationReport& r, int indent) {
  ojson doc;
  doc["n_programs"] = r.n_programs;
  doc["correct_alive2"] = r.correct_alive2;
  doc["correct_combined"] = r.correct_combined;
  doc["correctness_alive2"] = r.correctness_alive2;
  doc["correctness_combined"] = r.correctness_combined;
  doc["correctness_alive2_display"] = format_percent(r.correct_alive2, r.n_programs);
  doc["correctness_combined_display"] = format_percent(r.correct_combined, r.n_programs);
  doc["avg_speedup"] = r.avg_speedup;
  doc["avg_speedup_display"] = format_speedup(r.avg_speedup);
  doc["mean"] = "arithmetic";
  doc["buckets"] = ojson::array();
  for (const auto& [t, b] : r.bucket_counts)
    doc["buckets"].push_back({{"threshold", t}, {"count", b.count}, {"fraction", b.fraction}});
  return doc.dump(indent);
}

std::string render_pairwise_markdown(const PairwiseResult& result, const std::string& a_label,
                                     const std::string& b_label, Band band) {
  std::string out = "| Comparison | " + a_label + " faster | Equal [" + fixed(band.low, 2) + ", " +
                    fixed(band.high, 2) + "] | " + b_label + " faster |\n|---|---|---|---|\n";
  out += "| " + a_label + " vs " + b_label + " | " + std::to_string(result.wins) + " | " + std::to_string(result.ties) +
         " | " + std::to_string(result.losses) + " |\n";
  return out;
}

std::string render_pairwise_json(const PairwiseResult& result, Band band, int indent) {
  ojson doc;
  doc["band"] = {band.low, band.high};
  doc["wins"] = result.wins;
  doc["ties"] = result.ties;
  doc["losses"] = result.losses;
  doc["ratios"] = ojson::array();
  for (const auto& [id, ratio] : result.ratios) {
    ojson entry = {{"program_id", id}};
    if (std::isinf(ratio)) entry["ratio"] = "inf";
    else entry["ratio"] = ratio;
    doc["ratios"].push_back(entry);
  }
  return doc.dump(indent);
}

std::string render_csv(const std::vector<ResultRecord>& results) {
  std::string out = "program_id,method,status,correct,avg_ns_base,avg_ns_opt,speedup\n";
  for (const auto& r : results) {
    bool correct = r.verdict.equivalent() && r.perf.correct;
    out += r.program_id + "," + std::string(verify::to_string(r.verdict.method)) + "," +
           std::string(verify::to_string(r.verdict.status)) + "," + (correct ? "true" : "false") + "," +
           fixed(r.perf.avg_ns_base, 3) + "," + fixed(r.perf.avg_ns_opt, 3) + "," +
           fixed(correct ? r.perf.speedup : 0.0, 3) + "\n";
  }
  return out;
}

}  // namespace intopt::report
