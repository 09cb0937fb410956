#include "test_support.hpp"

#include "intopt/batch.hpp"
#include "intopt/config.hpp"
#include "intopt/error.hpp"
#include "intopt/process.hpp"
#include "intopt/report.hpp"

#include <doctest.h>

#include <filesystem>

using namespace intopt;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(auto fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::IoError;
}

// Replay setup over the recorded transcripts.
std::string replay_toml(const fs::path& work) {
  auto f = test_support::fixtures();
  return "kb = \"" + (f / "e2e" / "kb.json").string() + "\"\n" +
         "transcripts = \"" + (f / "e2e" / "transcripts").string() + "\"\n" +
         "work_dir = \"" + work.string() + "\"\n" +
         "mode = \"replay\"\n"
         "[toolchain]\nopt = \"" + test_support::fake_opt().string() + "\"\nsearch_path = false\n"
         "[[backend]]\nid = \"mock\"\nkind = \"command\"\ncommand = [\"" +
         (f / "llm" / "mock_llm.py").string() + "\"]\n";
}

std::vector<fs::path> e2e_programs() {
  return batch::read_manifest(test_support::fixtures() / "ir" / "manifest.txt");
}

}  // namespace

TEST_CASE("config defaults and relative paths") {
  TempDir tmp;
  write_file(tmp.path() / "opt", "");
  auto cfg = PipelineConfig::parse(
      "work_dir = \"w\"\n[toolchain]\nopt = \"opt\"\n[[backend]]\nid = \"m\"\nendpoint = \"http://x/v1\"\n"
      "[verify]\nruns = 77\n[retrieval]\nm = 5\n",
      tmp.path());
  CHECK(cfg.toolchain.opt == tmp.path() / "opt");
  CHECK(cfg.work_dir == tmp.path() / "w");
  CHECK(cfg.transcripts_dir == tmp.path() / "transcripts");
  CHECK(cfg.fuzz_runs == 77);
  CHECK(cfg.retrieval_m == 5);
  CHECK(cfg.token_cap == 5000);
  CHECK(cfg.bench_warmup == 1000);
  CHECK(cfg.llm_mode == llm::Mode::Live);
  CHECK(cfg.formulation_backend == "m");
  CHECK(cfg.optimizer_backend == "m");
  CHECK(cfg.backend("m").kind == llm::BackendKind::OpenAiChat);
  CHECK(cfg.verify_config().fuzz.runs == 77);
}

TEST_CASE("config errors") {
  TempDir tmp;
  auto parse = [&](std::string text) { return [=, &tmp] { PipelineConfig::parse(text, tmp.path()); }; };
  CHECK(kind_of(parse("x = [")) == ErrorKind::ConfigError);
  CHECK(kind_of(parse("[[backend]]\nid = \"a\"\nkind = \"carrier-pigeon\"\n")) == ErrorKind::ConfigError);
  CHECK(kind_of(parse("[[backend]]\nid = \"a\"\n")) == ErrorKind::ConfigError);  // no endpoint
  CHECK(kind_of(parse("[[backend]]\nid = \"a\"\nkind = \"command\"\n")) == ErrorKind::ConfigError);
  CHECK(kind_of(parse("[[backend]]\nid = \"a\"\nendpoint = \"http://a\"\n[[backend]]\nid = \"a\"\nendpoint = \"http://a\"\n")) ==
        ErrorKind::ConfigError);
  CHECK(kind_of(parse("[[backend]]\nid = \"a\"\nendpoint = \"http://a\"\n[pipeline]\noptimizer_backend = \"b\"\n")) ==
        ErrorKind::ConfigError);
  CHECK(kind_of(parse("[toolchain]\nopt = \"missing/opt\"\n")) == ErrorKind::ConfigError);
  CHECK(kind_of(parse("mode = \"replay\"\ntranscripts = \"nope\"\n")) == ErrorKind::ConfigError);
  CHECK(kind_of(parse("mode = \"sometimes\"\n")) == ErrorKind::ConfigError);
  CHECK(kind_of(parse("token_cap = \"big\"\n")) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { PipelineConfig::load(tmp.path() / "none.toml"); }) == ErrorKind::ConfigError);
  PipelineConfig empty;
  CHECK(kind_of([&] { empty.backend("x"); }) == ErrorKind::ConfigError);
}

TEST_CASE("config location") {
  test_support::EnvGuard env("INTOPT_CONFIG", std::string("/from/env.toml"));
  CHECK(PipelineConfig::locate(fs::path("/cli.toml")) == fs::path("/cli.toml"));
  CHECK(PipelineConfig::locate(std::nullopt) == fs::path("/from/env.toml"));
  test_support::EnvGuard unset("INTOPT_CONFIG", std::nullopt);
  CHECK_FALSE(PipelineConfig::locate(std::nullopt));
}

TEST_CASE("manifest reading") {
  TempDir tmp;
  write_file(tmp.path() / "m.txt", "# comment\n\n a.ll \n/abs/b.ll\n");
  auto paths = batch::read_manifest(tmp.path() / "m.txt");
  REQUIRE(paths.size() == 2);
  CHECK(paths[0] == fs::absolute(tmp.path()) / "a.ll");
  CHECK(paths[1] == "/abs/b.ll");
}

TEST_CASE("replayed batch runs are byte-identical") {
  TempDir tmp;
  auto cfg = PipelineConfig::parse(replay_toml(tmp.path() / "work"), tmp.path());
  test_support::EnvGuard clang("INTOPT_CLANGXX", std::nullopt);
  test_support::EnvGuard alive("INTOPT_ALIVE_TV", std::nullopt);
  batch::BatchOptions a{tmp.path() / "a.jsonl", false, tmp.path() / "out"};
  batch::BatchOptions b{tmp.path() / "b.jsonl", false, std::nullopt};
  auto sa = batch::run_batch(e2e_programs(), cfg, a);
  cfg.workers = 3;
  auto sb = batch::run_batch(e2e_programs(), cfg, b);
  CHECK(sa.total == 3);
  CHECK(sa.ok == 3);
  CHECK(sb.ok == 3);
  CHECK(read_file(a.results) == read_file(b.results));

  auto recs = report::load_results(a.results);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].program_id == "chocolateFeast");
  CHECK(recs[1].program_id == "reverse_bits");
  CHECK(recs[2].program_id == "numberOfOperations");
  for (const auto& r : recs) {
    CHECK(r.status == "ok");
    CHECK(r.optimized_validity == "valid");
    CHECK(r.verdict.status == verify::Status::Skipped);
    CHECK(r.verdict.reason == "tool_missing");
    CHECK(r.perf.speedup == 0.0);
    CHECK(r.optimized_sha256 == sha256_hex(read_file(tmp.path() / "out" / (r.program_id + ".opt.ll"))));
  }
  CHECK(recs[0].analyses == std::vector<std::string>{"AAManager", "AssumptionAnalysis", "DominatorTreeAnalysis",
                                                     "LoopAnalysis", "MemoryDependenceAnalysis",
                                                     "ScalarEvolutionAnalysis", "TargetIRAnalysis",
                                                     "TargetLibraryAnalysis"});
  CHECK(fs::exists(tmp.path() / "out" / "chocolateFeast.strategy.json"));
}

TEST_CASE("batch records per-program failures and resumes") {
  TempDir tmp;
  auto cfg = PipelineConfig::parse(replay_toml(tmp.path() / "work"), tmp.path());
  test_support::EnvGuard clang("INTOPT_CLANGXX", std::nullopt);
  auto programs = e2e_programs();
  programs.push_back(test_support::fixtures() / "ir" / "broken.ll");
  write_file(tmp.path() / "unrecorded.ll", "define i32 @unrecorded(i32 %x) {\n  ret i32 %x\n}\n");
  programs.push_back(tmp.path() / "unrecorded.ll");

  batch::BatchOptions opts{tmp.path() / "r.jsonl", false, std::nullopt};
  auto s = batch::run_batch(programs, cfg, opts);
  CHECK(s.ok == 3);
  CHECK(s.failed == 2);
  auto recs = report::load_results(opts.results);
  REQUIRE(recs.size() == 5);
  CHECK(recs[3].status == "InvalidIr");
  CHECK(recs[4].status == "ReplayMiss");

  // Resume keeps finished records and a torn tail is dropped.
  auto kept = read_file(opts.results);
  write_file(opts.results, kept.substr(0, kept.find('\n') + 1) + "{\"program_id\": \"rev");
  opts.resume = true;
  auto r = batch::run_batch(programs, cfg, opts);
  CHECK(r.resumed == 1);
  CHECK(r.ok + r.failed == 4);
  CHECK(read_file(opts.results) == kept);
}

TEST_CASE("batch configuration errors happen before any work") {
  TempDir tmp;
  auto cfg = PipelineConfig::parse(replay_toml(tmp.path() / "work"), tmp.path());
  batch::BatchOptions opts{tmp.path() / "r.jsonl", false, std::nullopt};

  auto dup = e2e_programs();
  dup.push_back(dup.front());
  CHECK(kind_of([&] { batch::run_batch(dup, cfg, opts); }) == ErrorKind::ConfigError);

  auto no_opt = cfg;
  no_opt.toolchain.opt.reset();
  test_support::EnvGuard env("INTOPT_OPT", std::nullopt);
  CHECK(kind_of([&] { batch::run_batch(e2e_programs(), no_opt, opts); }) == ErrorKind::ConfigError);

  auto no_kb = cfg;
  no_kb.kb_path.reset();
  CHECK(kind_of([&] { batch::run_batch(e2e_programs(), no_kb, opts); }) == ErrorKind::ConfigError);
  CHECK_FALSE(fs::exists(opts.results));
}
