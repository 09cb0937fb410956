#include "intopt/bench.hpp"

#include "intopt/embedded_harness.hpp"
#include "intopt/error.hpp"
#include "intopt/log.hpp"
#include "intopt/process.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <mutex>
#include <regex>

namespace fs = std::filesystem;

namespace intopt::bench {
namespace {

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  for (size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size()))
    text.replace(pos, from.size(), to);
}

struct CallSite {
  size_t begin = 0;  // line start
  size_t end = 0;    // past the newline
  std::string indent;
  std::string result_var;  // empty for a bare call
  std::string callee;
};

std::vector<CallSite> find_call_statements(const std::string& text, size_t from) {
  static const std::regex assign(R"(^([ \t]*)[A-Za-z_][\w:<>\s\*&]*?[\w>\*&]\s+([A-Za-z_]\w*)\s*=\s*([A-Za-z_]\w*)\s*\([^;]*\)\s*;[ \t]*$)");
  static const std::regex bare(R"(^([ \t]*)([A-Za-z_]\w*)\s*\([^;]*\)\s*;[ \t]*$)");
  std::vector<CallSite> sites;
  size_t pos = from;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    size_t line_end = nl == std::string::npos ? text.size() : nl;
    std::string line = text.substr(pos, line_end - pos);
    std::smatch m;
    CallSite site;
    site.begin = pos;
    site.end = nl == std::string::npos ? text.size() : nl + 1;
    if (std::regex_match(line, m, assign)) {
      site.indent = m[1].str();
      site.result_var = m[2].str();
      site.callee = m[3].str();
      sites.push_back(site);
    } else if (std::regex_match(line, m, bare)) {
      site.indent = m[1].str();
      site.callee = m[2].str();
      static const std::set<std::string> keywords = {"if", "while", "for", "switch", "return", "sizeof"};
      if (!keywords.contains(site.callee)) sites.push_back(site);
    }
    pos = site.end;
  }
  return sites;
}

std::string suffix_for(size_t k) { return k == 0 ? "" : "_" + std::to_string(k); }

std::regex double_field(const std::string& prefix) {
  return std::regex(prefix + R"( calls=(\d+) avg\(ns/call\)=([-+0-9.eEnaif]+))");
}

std::mutex& bench_lock() {
  static std::mutex m;
  return m;
}

}  // namespace

BenchHarness fuzz_to_bench(const verify::FuzzHarness& harness, int warmup_iters) {
  std::string source = harness.source;
  static const std::regex entry(R"((extern\s+"C"\s+)?int\s+LLVMFuzzerTestOneInput\s*\()");
  std::smatch m;
  if (!std::regex_search(source, m, entry))
    throw Error(ErrorKind::TransformFailure, "harness has no LLVMFuzzerTestOneInput entry point");
  size_t entry_pos = m.position(0);
  source.replace(entry_pos, m.length(0), "static int decode_input(");

  auto sites = find_call_statements(source, entry_pos);
  std::set<std::string> callees;
  for (const auto& s : sites) callees.insert(s.callee);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& c : callees)
    if (!c.ends_with("_opt") && callees.contains(c + "_opt")) pairs.emplace_back(c, c + "_opt");
  if (pairs.empty())
    throw Error(ErrorKind::TransformFailure, "no (f, f_opt) call statements found in the fuzz entry point");
  if (pairs.size() > 1) log::info("benchmark times " + std::to_string(pairs.size()) + " function pairs separately");

  std::map<std::string, std::pair<size_t, bool>> role;  // callee -> (pair index, is opt)
  for (size_t k = 0; k < pairs.size(); ++k) {
    role[pairs[k].first] = {k, false};
    role[pairs[k].second] = {k, true};
  }

  // Rewrite from the back so earlier offsets stay valid; timer names are
  // numbered in source order.
  std::vector<const CallSite*> timed;
  for (const auto& s : sites)
    if (role.contains(s.callee)) timed.push_back(&s);
  std::vector<std::string> replacements(timed.size());
  int timer = 0;
  for (size_t i = 0; i < timed.size(); ++i) {
    const auto& s = *timed[i];
    auto [k, is_opt] = role[s.callee];
    const std::string sfx = suffix_for(k);
    const std::string t0 = "__t" + std::to_string(timer++), t1 = "__t" + std::to_string(timer++);
    const std::string& in = s.indent;
    std::string stmt = source.substr(s.begin, s.end - s.begin);
    if (!stmt.empty() && stmt.back() != '\n') stmt += '\n';
    std::string acc_t = is_opt ? "g_t_opt_ns" + sfx : "g_t_baseline_ns" + sfx;
    std::string acc_n = is_opt ? "g_n_opt" + sfx : "g_n_baseline" + sfx;
    std::string out;
    out += in + "uint64_t " + t0 + " = now_ns();\n";
    out += stmt;
    out += in + "uint64_t " + t1 + " = now_ns();\n";
    out += in + acc_t + " += (" + t1 + " - " + t0 + ");\n";
    out += in + acc_n + "++;\n";
    if (!s.result_var.empty()) out += in + "g_sink ^= (uintptr_t)(const void*)&" + s.result_var + ";\n";
    replacements[i] = out;
  }
  for (size_t i = timed.size(); i-- > 0;)
    source.replace(timed[i]->begin, timed[i]->end - timed[i]->begin, replacements[i]);

  std::string accumulators;
  std::string save, restore, report;
  for (size_t k = 0; k < pairs.size(); ++k) {
    const std::string s = suffix_for(k);
    accumulators += "static uint64_t g_t_baseline_ns" + s + " = 0;\n";
    accumulators += "static uint64_t g_t_opt_ns" + s + "      = 0;\n";
    accumulators += "static uint64_t g_n_baseline" + s + "    = 0;\n";
    accumulators += "static uint64_t g_n_opt" + s + "         = 0;\n";
    save += "    uint64_t sb" + s + "=g_t_baseline_ns" + s + ", so" + s + "=g_t_opt_ns" + s + ", nb" + s + "=g_n_baseline" +
            s + ", no" + s + "=g_n_opt" + s + ";\n";
    restore += "    g_t_baseline_ns" + s + "=sb" + s + "; g_t_opt_ns" + s + "=so" + s + "; g_n_baseline" + s + "=nb" + s +
               "; g_n_opt" + s + "=no" + s + ";\n";
    report += "    {\n";
    report += "        double avg_b = g_n_baseline" + s + " ? (double)g_t_baseline_ns" + s + " / (double)g_n_baseline" + s +
              " : 0.0;\n";
    report += "        double avg_o = g_n_opt" + s + "      ? (double)g_t_opt_ns" + s + "      / (double)g_n_opt" + s +
              "      : 0.0;\n";
    if (pairs.size() > 1) report += "        std::cout << \"pair=" + pairs[k].first + "\\n\";\n";
    report += "        std::cout << \"baseline calls=\" << g_n_baseline" + s + " << \" avg(ns/call)=\" << avg_b << \"\\n\";\n";
    report += "        std::cout << \"opt      calls=\" << g_n_opt" + s + "      << \" avg(ns/call)=\" << avg_o << \"\\n\";\n";
    report += "        if (avg_o > 0) std::cout << \"speedup=\" << (avg_b / avg_o) << \"x\\n\";\n";
    report += "    }\n";
  }
  if (!save.empty()) save.pop_back();
  if (!restore.empty()) restore.pop_back();
  if (!report.empty()) report.pop_back();

  std::string prelude(embedded::bench_prelude);
  replace_all(prelude, "@ACCUMULATORS@", accumulators);

  // The prelude goes after the leading #include block.
  size_t insert_at = 0;
  static const std::regex include_line(R"(^[ \t]*#[ \t]*include[^\n]*\n?)", std::regex::multiline);
  for (auto it = std::sregex_iterator(source.begin(), source.begin() + static_cast<long>(entry_pos), include_line);
       it != std::sregex_iterator(); ++it)
    insert_at = static_cast<size_t>(it->position(0) + it->length(0));
  source.insert(insert_at, prelude);

  std::string driver(embedded::bench_main);
  replace_all(driver, "@DEFAULT_ITERS@", std::to_string(kDriverDefaultIters));
  replace_all(driver, "@WARMUP@", std::to_string(warmup_iters));
  replace_all(driver, "@SAVE@", save);
  replace_all(driver, "@RESTORE@", restore);
  replace_all(driver, "@REPORT@", report);
  if (!source.empty() && source.back() != '\n') source += '\n';
  source += driver;

  return {source, pairs, warmup_iters, kDriverDefaultIters};
}

double speedup(bool correct, double avg_ns_base, double avg_ns_opt) {
  if (!correct || !(avg_ns_opt > 0.0)) return 0.0;
  return avg_ns_base / avg_ns_opt;
}

PerfRecord finalize(PerfRecord record) {
  record.speedup = speedup(record.correct, record.avg_ns_base, record.avg_ns_opt);
  return record;
}

BenchOutput parse_bench_output(const std::string& text) {
  BenchOutput out;
  double total_b = 0.0, total_o = 0.0;
  static const std::regex base_re = double_field("baseline");
  static const std::regex opt_re = double_field("opt     ");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), base_re); it != std::sregex_iterator(); ++it) {
    long long calls = std::stoll((*it)[1].str());
    out.calls_base += calls;
    total_b += std::stod((*it)[2].str()) * static_cast<double>(calls);
  }
  for (auto it = std::sregex_iterator(text.begin(), text.end(), opt_re); it != std::sregex_iterator(); ++it) {
    long long calls = std::stoll((*it)[1].str());
    out.calls_opt += calls;
    total_o += std::stod((*it)[2].str()) * static_cast<double>(calls);
  }
  out.avg_ns_base = out.calls_base ? total_b / static_cast<double>(out.calls_base) : 0.0;
  out.avg_ns_opt = out.calls_opt ? total_o / static_cast<double>(out.calls_opt) : 0.0;
  static const std::regex clock_re(R"(clock=(\w+))");
  std::smatch m;
  if (std::regex_search(text, m, clock_re)) out.clock = m[1].str();
  return out;
}

fs::path build_bench(const IrProgram& merged, const BenchHarness& bench, const ToolchainConfig& toolchain,
                     const fs::path& workdir, const verify::BuildOptions& options) {
  fs::create_directories(workdir);
  auto ll = workdir / "merged.ll";
  auto cc = workdir / "bench.cc";
  write_file(ll, merged.text);
  write_file(cc, bench.source);
  std::string log;
  auto object = verify::compile_ir(ll, toolchain, workdir, options, &log);
  auto clang = toolchain.resolve(Tool::ClangXX);
  auto binary = workdir / "bench";
  auto result = run_process({clang.string(), "-O2", cc.string(), object.string(), "-o", binary.string()},
                            {.timeout = std::chrono::duration_cast<std::chrono::milliseconds>(options.timeout)});
  if (!result.ok()) throw Error(ErrorKind::BuildFailure, "linking the benchmark failed", log + result.out + result.err);
  return binary;
}

PerfRecord run_bench(const fs::path& binary, const fs::path& corpus_dir, long long timed_iters) {
  if (timed_iters < 1) throw Error(ErrorKind::Precondition, "timed iterations must be at least 1");
  if (!fs::exists(binary)) throw Error(ErrorKind::RunFailure, "benchmark binary not found: " + binary.string());
  std::vector<fs::path> inputs;
  std::error_code ec;
  if (fs::is_directory(corpus_dir, ec))
    for (const auto& entry : fs::directory_iterator(corpus_dir))
      if (entry.is_regular_file()) inputs.push_back(entry.path());
  std::sort(inputs.begin(), inputs.end());
  if (inputs.empty()) throw Error(ErrorKind::EmptyCorpus, "no inputs in " + corpus_dir.string());

  std::lock_guard lock(bench_lock());
  PerfRecord record;
  record.correct = true;
  record.iters = timed_iters;
  double total_b = 0.0, total_o = 0.0;
  long long calls_b = 0, calls_o = 0;
  for (const auto& input : inputs) {
    auto result = run_process({fs::absolute(binary).string(), input.string(), std::to_string(timed_iters)},
                              {.timeout = std::chrono::milliseconds(600'000)});
    if (!result.ok())
      throw Error(ErrorKind::RunFailure, "benchmark failed on " + input.filename().string(), result.out + result.err);
    auto parsed = parse_bench_output(result.out);
    if (parsed.calls_base == 0 && parsed.calls_opt == 0) continue;
    ++record.inputs_used;
    calls_b += parsed.calls_base;
    calls_o += parsed.calls_opt;
    total_b += parsed.avg_ns_base * static_cast<double>(parsed.calls_base);
    total_o += parsed.avg_ns_opt * static_cast<double>(parsed.calls_opt);
    if (!parsed.clock.empty()) record.clock = parsed.clock;
  }
  record.avg_ns_base = calls_b ? total_b / static_cast<double>(calls_b) : 0.0;
  record.avg_ns_opt = calls_o ? total_o / static_cast<double>(calls_o) : 0.0;
  return finalize(record);
}

std::string perf_to_json(const PerfRecord& r, int indent) {
  nlohmann::ordered_json doc;
  doc["program_id"] = r.program_id;
  doc["correct"] = r.correct;
  doc["avg_ns_base"] = r.avg_ns_base;
  doc["avg_ns_opt"] = r.avg_ns_opt;
  doc["speedup"] = r.speedup;
  doc["inputs_used"] = r.inputs_used;
  doc["iters"] = r.iters;
  doc["warmup_iters"] = r.warmup_iters;
  doc["clock"] = r.clock;
  return doc.dump(indent);
}

}  // namespace intopt::bench
