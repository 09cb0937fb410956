// One line per acceptance criterion: PASS, FAIL or SKIP (with the reason).
// Exit status is nonzero when any criterion fails.

#include "intopt/bench.hpp"
#include "intopt/error.hpp"
#include "intopt/ir_corpus.hpp"
#include "intopt/knowledge_base.hpp"
#include "intopt/process.hpp"
#include "intopt/prompts.hpp"
#include "intopt/report.hpp"
#include "intopt/retrieval.hpp"
#include "intopt/verification.hpp"

#include "retrieval_oracle.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace intopt;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kFixtures = INTOPT_FIXTURES;
const fs::path kBinary = INTOPT_BINARY;

enum class Outcome { Pass, Fail, Skip };

struct Result {
  Outcome outcome = Outcome::Pass;
  std::string detail;
};

Result pass(std::string d = "") { return {Outcome::Pass, std::move(d)}; }
Result fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Result skip(std::string d) { return {Outcome::Skip, std::move(d)}; }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 3) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(prec);
  o << v;
  return o.str();
}

ToolchainConfig toolchain() {
  ToolchainConfig tc;
  tc.opt = kFixtures / "toolchain" / "opt";
  tc.clangxx = find_on_path("clang++");
  tc.alive_tv = find_on_path("alive-tv");
  tc.search_path = false;
  return tc;
}

// ---------------------------------------------------------------------------

Result kb_oracle() {
  auto root = kFixtures / "mini-llvm" / "llvm";
  auto docs = read_file(root / "docs" / "Passes.rst");
  kb::BuildOptions opts;
  opts.built_at = "1970-01-01T00:00:00Z";
  auto t0 = Clock::now();
  auto first = kb::build_kb(root, docs, opts);
  double secs = seconds_since(t0);
  auto second = kb::build_kb(root, docs, opts);
  const auto* lv = first.find("LoopVectorizePass");
  if (!lv) return fail("LoopVectorizePass missing");
  std::set<std::string> want = {"LoopAnalysis", "TargetLibraryAnalysis"};
  if (lv->deps != want) {
    std::string got;
    for (const auto& d : lv->deps) got += " " + d;
    return fail("LoopVectorizePass deps:" + got);
  }
  if (kb::serialize(first) != kb::serialize(second)) return fail("two builds differ");
  if (secs >= 5.0) return fail("build took " + fmt(secs) + " s");
  return pass(std::to_string(first.entries.size()) + " passes, " + fmt(secs) + " s");
}

Result retrieval_properties() {
  std::mt19937 rng(1234567);
  const std::vector<std::string> lexicon = {"loop", "unroll", "vector", "dead", "code", "value", "number", "memory",
                                            "promote", "hoist", "branch", "fold", "constant", "inline", "tail", "phi"};
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto sentence = [&](int lo, int hi, bool oov) {
    std::string s;
    for (int i = 0, n = pick(lo, hi); i < n; ++i) {
      if (i) s += " ";
      s += oov && pick(0, 5) == 0 ? "qq" + std::to_string(pick(0, 2))
                                  : lexicon[static_cast<size_t>(pick(0, static_cast<int>(lexicon.size()) - 1))];
    }
    return s;
  };
  int failures = 0;
  std::string first_failure;
  auto check = [&](bool ok, const std::string& what, int c) {
    if (ok) return;
    if (!failures++) first_failure = what + " (case " + std::to_string(c) + ")";
  };
  for (int c = 0; c < 1000; ++c) {
    int n = pick(1, 10);
    std::vector<std::pair<std::string, std::string>> docs;
    for (int d = 0; d < n; ++d) docs.emplace_back("P" + std::to_string(d), sentence(1, 10, false));
    auto query = sentence(1, 6, true);
    auto index = retrieval::TfIdfIndex::build(docs);
    auto expected = oracle::BruteForce(docs).scores(query);
    auto all = retrieval::retrieve(index, query, n);
    for (const auto& h : all) {
      check(h.score >= 0.0 && h.score <= 1.0, "score outside [0,1]", c);
      check(std::abs(h.score - expected.at(h.pass_id)) <= 1e-9, "oracle disagreement", c);
    }
    for (int m = 1; m < n; ++m) {
      auto a = retrieval::retrieve(index, query, m), b = retrieval::retrieve(index, query, m + 1);
      for (size_t i = 0; i < a.size(); ++i) check(i < b.size() && a[i].pass_id == b[i].pass_id, "prefix", c);
    }
    size_t d = static_cast<size_t>(pick(0, n - 1));
    bool self = false;
    for (const auto& h : retrieval::retrieve(index, docs[d].second, n))
      if (h.pass_id == docs[d].first) self = h.score == 1.0;
    check(self, "self-similarity != 1", c);
    auto qv = index.vectorize(query);
    if (!qv.empty()) {
      double k = std::exp(std::uniform_real_distribution<double>(-6, 6)(rng));
      auto scaled = qv;
      for (auto& [_, w] : scaled) w *= k;
      auto x = retrieval::retrieve(index, qv, n), y = retrieval::retrieve(index, scaled, n);
      check(x.size() == y.size(), "scaling changed hit count", c);
      for (size_t i = 0; i < x.size() && i < y.size(); ++i)
        check(x[i].pass_id == y[i].pass_id || std::abs(x[i].score - y[i].score) <= 1e-9, "scaling changed rank", c);
    }
  }
  if (failures) return fail(std::to_string(failures) + " violations; first: " + first_failure);
  return pass("1000 cases");
}

Result prompt_goldens() {
  const auto& set = prompts::StagePromptSet::defaults();
  auto golden = [](const char* n) { return read_file(kFixtures / "prompts" / (std::string(n) + ".txt")); };
  std::vector<std::pair<std::string, bool>> checks = {
      {"formulation", prompts::render_formulation(set, "(Unopt Input LLVM IR)") == golden("formulation")},
      {"refinement", prompts::render_refinement(set, "(Unopt LLVM IR)", "(Initial Strategy)", "(Compiler Analysis)") ==
                         golden("refinement")},
      {"realization", prompts::render_realization(set, "(Unopt LLVM IR)", "(Refined Strategy)",
                                                  "(Compiler Analysis)") == golden("realization")},
      {"baseline", prompts::render_baseline(set, "(Unopt LLVM IR)") == golden("baseline")},
  };
  std::string bad;
  for (const auto& [name, ok] : checks)
    if (!ok) bad += " " + name;
  return bad.empty() ? pass("4 templates") : fail("mismatch:" + bad);
}

Result replay_e2e() {
  TempDir tmp("intopt-accept");
  auto cfg_path = tmp.path() / "intopt.toml";
  write_file(cfg_path, "kb = \"" + (kFixtures / "e2e" / "kb.json").string() + "\"\n" +
                           "transcripts = \"" + (kFixtures / "e2e" / "transcripts").string() + "\"\n" +
                           "work_dir = \"work\"\n"
                           "[toolchain]\nopt = \"" + (kFixtures / "toolchain" / "opt").string() +
                           "\"\nsearch_path = false\n"
                           "[[backend]]\nid = \"mock\"\nkind = \"command\"\ncommand = [\"" +
                           (kFixtures / "llm" / "mock_llm.py").string() + "\"]\n");
  std::vector<std::string> outputs;
  for (const char* name : {"run1.jsonl", "run2.jsonl"}) {
    auto r = run_process({"env", "INTOPT_CONFIG=", "INTOPT_CLANGXX=", "INTOPT_ALIVE_TV=", kBinary.string(), "--config",
                          cfg_path.string(), "batch", "--mode", "replay", "--manifest",
                          (kFixtures / "ir" / "manifest.txt").string(), "--results", (tmp.path() / name).string()},
                         {.timeout = std::chrono::milliseconds(300'000)});
    if (!r.ok()) return fail(std::string("intopt batch failed: ") + r.err.substr(0, 300));
    outputs.push_back(read_file(tmp.path() / name));
  }
  if (outputs[0] != outputs[1]) return fail("results differ between runs");
  auto recs = report::load_results(tmp.path() / "run1.jsonl");
  if (recs.size() != 3) return fail(std::to_string(recs.size()) + " records");
  for (const auto& r : recs)
    if (r.status != "ok") return fail(r.program_id + ": " + r.error);
  return pass("3 programs, " + std::to_string(outputs[0].size()) + " identical bytes");
}

IrPair load_pair(const std::string& id, const fs::path& a, const fs::path& b) {
  auto u = load_ir(a), o = load_ir(b);
  u.id = o.id = id;
  return {u, o, PairProvenance::LlmPipeline};
}

verify::VerifyConfig verify_config(const fs::path& root) {
  verify::VerifyConfig c;
  c.toolchain = toolchain();
  c.work_root = root;
  c.fuzz.runs = 10'000;
  c.fuzz.wall_budget = std::chrono::seconds(120);
  c.use_alive = false;
  return c;
}

Result verify_reflexive() {
  if (!find_on_path("clang++")) return fail("clang++ not found (tool_missing)");
  TempDir tmp("intopt-accept");
  auto p = load_ir(kFixtures / "ir" / "numberOfOperations.ll");
  auto t0 = Clock::now();
  auto v = verify::verify({p, p, PairProvenance::CompilerO3}, verify_config(tmp.path()));
  double secs = seconds_since(t0);
  if (v.status != verify::Status::Equivalent)
    return fail(std::string(verify::to_string(v.status)) + " " + v.reason + ": " + v.detail.substr(0, 300));
  if (v.fuzz_runs_completed < 10'000) return fail("only " + std::to_string(v.fuzz_runs_completed) + " runs");
  if (secs >= 120) return fail("took " + fmt(secs, 1) + " s");
  return pass(std::to_string(v.fuzz_runs_completed) + " runs, " + fmt(secs, 1) + " s");
}

Result verify_half() {
  if (!find_on_path("clang++")) return fail("clang++ not found (tool_missing)");
  TempDir tmp("intopt-accept");
  auto pair = load_pair("half", kFixtures / "pairs" / "half.ll", kFixtures / "pairs" / "half.opt.ll");
  auto cfg = verify_config(tmp.path());
  auto v = verify::verify(pair, cfg);
  if (v.status != verify::Status::FuzzCrash) return fail(std::string(verify::to_string(v.status)) + " " + v.reason);
  if (v.reproducer.empty() || !fs::exists(v.reproducer)) return fail("no reproducer saved");
  if (!verify::replay_reproducer(verify::workspace_for(pair, cfg) / "fuzzer", v.reproducer))
    return fail("reproducer does not crash on replay");
  return pass("fuzz_crash, reproducer replays");
}

Result verify_alive() {
  auto pair = load_pair("half", kFixtures / "pairs" / "half.ll", kFixtures / "pairs" / "half.opt.ll");
  auto v = verify::alive_check(pair, toolchain());
  if (!toolchain().has(Tool::AliveTv)) {
    if (v.status == verify::Status::Skipped && !v.reason.empty()) return skip(v.reason);
    return fail("alive-tv missing but verdict is " + std::string(verify::to_string(v.status)));
  }
  if (v.method != verify::Method::Alive2) return fail("method " + std::string(verify::to_string(v.method)));
  if (v.status != verify::Status::Inequivalent) return fail("half pair: " + std::string(verify::to_string(v.status)));
  return pass("alive2 rejects the half pair");
}

Result bench_math() {
  std::string bad;
  if (std::abs(bench::speedup(true, 100, 50) - 2.0) > 1e-12) bad += " speedup(100,50)";
  if (bench::speedup(false, 100, 50) != 0.0) bad += " incorrect";
  std::vector<bench::PerfRecord> recs;
  std::vector<report::KeyedVerdict> verdicts;
  for (double s : {0.0, 1.0, 2.0, 3.0}) {
    bench::PerfRecord r;
    r.program_id = "p" + fmt(s, 0);
    r.correct = s > 0;
    r.avg_ns_base = s * 10;
    r.avg_ns_opt = 10;
    recs.push_back(bench::finalize(r));
    report::KeyedVerdict k;
    k.program_id = r.program_id;
    k.verdict.status = s > 0 ? verify::Status::Equivalent : verify::Status::Inequivalent;
    verdicts.push_back(k);
  }
  auto rep = report::aggregate(recs, verdicts);
  if (report::format_speedup(rep.avg_speedup) != "1.500x") bad += " avg=" + report::format_speedup(rep.avg_speedup);
  if (rep.bucket_counts[1.1].count != 2 || rep.bucket_counts[1.5].count != 2 || rep.bucket_counts[2.0].count != 1)
    bad += " buckets";
  for (double r : {0.98, 1.0, 1.02})
    if (report::classify_ratio(r) != report::Outcome::Tie) bad += " tie@" + fmt(r);
  if (report::classify_ratio(0.979) != report::Outcome::Loss) bad += " loss@0.979";
  if (report::classify_ratio(1.021) != report::Outcome::Win) bad += " win@1.021";
  return bad.empty() ? pass("avg 1.500x, buckets (2, 2, 1)") : fail(bad);
}

Result report_percent() {
  TempDir tmp("intopt-accept");
  auto path = tmp.path() / "results.jsonl";
  {
    std::ofstream out(path);
    for (int i = 0; i < 200; ++i) {
      report::ResultRecord r;
      r.program_id = "p" + std::to_string(i);
      r.verdict.method = verify::Method::DiffTest;
      r.verdict.status = i < 181 ? verify::Status::Equivalent : verify::Status::Inequivalent;
      r.perf.program_id = r.program_id;
      out << report::record_to_jsonl(r) << "\n";
    }
  }
  auto rep = report::aggregate(report::load_results(path));
  auto md = report::render_markdown(rep);
  if (md.find("90.5%") == std::string::npos) return fail("rendered: " + md);
  return pass(report::format_percent(rep.correct_combined, rep.n_programs));
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* what;
    std::function<Result()> run;
  };
  const std::vector<Criterion> criteria = {
      {"1", "knowledge base: LoopVectorizePass deps, determinism, < 5 s", kb_oracle},
      {"2", "retrieval: 1000 randomized property cases vs brute-force oracle", retrieval_properties},
      {"3", "prompt templates match goldens byte-exactly", prompt_goldens},
      {"4", "replay end-to-end: 3 programs, byte-identical batch output", replay_e2e},
      {"5a", "verification: reflexive pair equivalent after 10000 runs in < 2 min", verify_reflexive},
      {"5b", "verification: x/2 vs x>>1 gives fuzz_crash with a replayable reproducer", verify_half},
      {"5c", "verification: alive2 method when alive-tv is present", verify_alive},
      {"6", "benchmark math: speedup, aggregate, buckets, tie band", bench_math},
      {"7", "report: 181/200 renders as 90.5%", report_percent},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = fail(std::string("exception: ") + e.what());
    }
    const char* tag = r.outcome == Outcome::Pass ? "PASS" : r.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    failed += r.outcome == Outcome::Fail;
    std::cout << tag << "  [" << c.id << "] " << c.what;
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed or skipped"))
            << std::endl;
  return failed ? 1 : 0;
}
