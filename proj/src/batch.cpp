#include "intopt/batch.hpp"

#include "intopt/analysis.hpp"
#include "intopt/bench.hpp"
#include "intopt/error.hpp"
#include "intopt/log.hpp"
#include "intopt/pipeline.hpp"
#include "intopt/process.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace intopt::batch {
namespace {

std::string_view validity_name(Validity v) {
  switch (v) {
    case Validity::Valid: return "valid";
    case Validity::Invalid: return "invalid";
    case Validity::Unchecked: return "unchecked";
  }
  return "unchecked";
}

struct Context {
  const PipelineConfig& config;
  std::optional<kb::KnowledgeBase> kb;
  std::optional<retrieval::TfIdfIndex> index;
  analysis::AnalysisNameMap name_map;
  std::shared_ptr<llm::TranscriptStore> store;
  std::map<std::string, std::unique_ptr<llm::Backend>> backends;
  std::unique_ptr<pipeline::Pipeline> pipeline;
  verify::VerifyConfig verify_config;
  const BatchOptions& options;
};

// Existing records (for --resume). A torn final line from an interrupted run is dropped.
std::vector<std::string> read_existing(const fs::path& path, std::set<std::string>& ids) {
  std::vector<std::string> lines;
  if (!fs::exists(path)) return lines;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ids.insert(report::record_from_json(line).program_id);
      lines.push_back(line);
    } catch (const Error&) {
      log::warning("resume: dropping malformed line in " + path.string());
    }
  }
  return lines;
}

report::ResultRecord process(const fs::path& path, Context& ctx) {
  report::ResultRecord rec;
  rec.program_id = path.stem().string();
  rec.mode = std::string(to_string(ctx.config.optimize_mode));
  rec.verdict.reason = "not_verified";
  rec.perf.program_id = rec.program_id;
  rec.perf.warmup_iters = ctx.config.bench_warmup;
  try {
    auto program = load_ir(path);
    validate_ir(program, ctx.config.toolchain);

    IrProgram optimized;
    std::optional<OptimizationStrategy> refined;
    if (ctx.config.optimize_mode == OptimizeMode::Pipeline) {
      auto run = ctx.pipeline->run(program, *ctx.kb, *ctx.index, ctx.name_map);
      rec.analyses.assign(run.resolution.analyses.begin(), run.resolution.analyses.end());
      optimized = std::move(run.optimized);
      refined = std::move(run.refined);
    } else {
      optimized = ctx.pipeline->baseline(program);
    }
    rec.optimized_sha256 = sha256_hex(optimized.text);
    rec.optimized_validity = std::string(validity_name(optimized.validity));
    if (ctx.options.out_dir) {
      write_file(*ctx.options.out_dir / (rec.program_id + ".opt.ll"), optimized.text);
      if (refined) write_file(*ctx.options.out_dir / (rec.program_id + ".strategy.json"), strategy_to_json(*refined) + "\n");
    }

    IrPair pair{program, optimized, PairProvenance::LlmPipeline};
    rec.verdict = verify::verify(pair, ctx.verify_config);
    rec.perf.correct = rec.verdict.equivalent();

    if (rec.verdict.equivalent() && ctx.config.bench_enabled) {
      try {
        auto workdir = verify::workspace_for(pair, ctx.verify_config);
        verify::FuzzHarness harness{read_file(workdir / "fuzz.cc"), {}, verify::HarnessProvenance::Template};
        auto bench_src = bench::fuzz_to_bench(harness, ctx.config.bench_warmup);
        auto binary = bench::build_bench(verify::merge_for_diff(pair), bench_src, ctx.config.toolchain, workdir / "bench",
                                         ctx.verify_config.build);
        auto perf = bench::run_bench(binary, workdir / "corpus", ctx.config.bench_iters);
        perf.program_id = rec.program_id;
        perf.warmup_iters = ctx.config.bench_warmup;
        rec.perf = perf;
      } catch (const Error& e) {
        rec.status = std::string(to_string(e.kind()));
        rec.error = std::string("bench: ") + e.what();
        rec.perf.correct = false;
      }
    }
  } catch (const Error& e) {
    rec.status = std::string(to_string(e.kind()));
    rec.error = e.what();
  } catch (const std::exception& e) {
    rec.status = "InternalError";
    rec.error = e.what();
  }
  rec.perf = bench::finalize(rec.perf);
  return rec;
}

}  // namespace

std::vector<fs::path> read_manifest(const fs::path& manifest) {
  std::istringstream in(read_file(manifest));
  std::vector<fs::path> out;
  auto base = fs::absolute(manifest).parent_path();
  for (std::string line; std::getline(in, line);) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    fs::path p(line.substr(b, e - b + 1));
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

BatchSummary run_batch(const std::vector<fs::path>& programs, const PipelineConfig& config,
                       const BatchOptions& options) {
  // Everything that can be a ConfigError is checked before the first program.
  if (!config.toolchain.has(Tool::Opt))
    throw Error(ErrorKind::ConfigError, "missing dependency: opt (set toolchain.opt or INTOPT_OPT)");
  std::set<std::string> ids;
  for (const auto& p : programs)
    if (!ids.insert(p.stem().string()).second)
      throw Error(ErrorKind::ConfigError, "duplicate program id in manifest: " + p.stem().string());

  Context ctx{config, {}, {}, analysis::AnalysisNameMap::builtin(), {}, {}, {}, config.verify_config(), options};
  if (config.optimize_mode == OptimizeMode::Pipeline) {
    if (!config.kb_path) throw Error(ErrorKind::ConfigError, "missing dependency: kb (pipeline mode needs a knowledge base)");
    try {
      ctx.kb = kb::load_kb(*config.kb_path);
      ctx.index = retrieval::TfIdfIndex::build(*ctx.kb);
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, std::string("cannot load knowledge base: ") + e.what());
    }
  }
  if (config.analysis_map) ctx.name_map = analysis::AnalysisNameMap::load(*config.analysis_map, config.analysis_map_replace);
  ctx.name_map.validate_against(config.toolchain);

  if (config.llm_mode != llm::Mode::Live) {
    ctx.store = std::make_shared<llm::TranscriptStore>(config.transcripts_dir);
    ctx.store->load();
  }
  auto backend_for = [&](const std::string& id) -> llm::Backend* {
    const auto& bc = config.backend(id);
    auto& slot = ctx.backends[id];
    if (!slot) slot = llm::make_backend(bc, config.llm_mode, ctx.store);
    return slot.get();
  };
  pipeline::StageBackend optimizer{backend_for(config.optimizer_backend), config.backend(config.optimizer_backend)};
  pipeline::StageBackend formulation = optimizer;
  if (config.optimize_mode == OptimizeMode::Pipeline)
    formulation = {backend_for(config.formulation_backend), config.backend(config.formulation_backend)};
  if (config.harness_mode == verify::HarnessMode::Llm) {
    ctx.verify_config.harness_backend = backend_for(config.harness_backend);
    ctx.verify_config.harness_backend_config = config.backend(config.harness_backend);
  }
  pipeline::PipelineOptions popts;
  popts.token_cap = config.token_cap;
  popts.retrieval_m = config.retrieval_m;
  popts.validate_input = false;  // done per program before optimizing
  popts.collect.timeout = config.analysis_timeout;
  ctx.pipeline = std::make_unique<pipeline::Pipeline>(formulation, optimizer, config.toolchain, popts);

  BatchSummary summary;
  summary.total = static_cast<int>(programs.size());
  std::set<std::string> done;
  std::vector<std::string> existing;
  if (options.resume) existing = read_existing(options.results, done);
  if (options.results.has_parent_path()) fs::create_directories(options.results.parent_path());
  if (options.out_dir) fs::create_directories(*options.out_dir);

  std::ofstream out(options.results, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + options.results.string());
  for (const auto& line : existing) out << line << '\n';
  out.flush();

  std::vector<size_t> todo;
  for (size_t i = 0; i < programs.size(); ++i) {
    if (done.contains(programs[i].stem().string())) ++summary.resumed;
    else todo.push_back(i);
  }

  std::vector<std::optional<report::ResultRecord>> slots(todo.size());
  std::mutex mu;
  size_t next_to_write = 0;
  std::atomic<size_t> next_job{0};
  auto worker = [&] {
    for (size_t j = next_job++; j < todo.size(); j = next_job++) {
      const auto& path = programs[todo[j]];
      log::info("batch: " + path.string());
      auto rec = process(path, ctx);
      std::lock_guard lock(mu);
      (rec.status == "ok" ? summary.ok : summary.failed)++;
      slots[j] = std::move(rec);
      while (next_to_write < slots.size() && slots[next_to_write]) {
        out << report::record_to_jsonl(*slots[next_to_write]) << '\n';
        out.flush();
        slots[next_to_write].reset();
        ++next_to_write;
      }
    }
  };
  int n_workers = std::max(1, std::min<int>(config.workers, static_cast<int>(todo.size())));
  std::vector<std::thread> threads;
  for (int i = 1; i < n_workers; ++i) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return summary;
}

}  // namespace intopt::batch
