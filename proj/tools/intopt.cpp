// intopt command-line driver.

#include "intopt/analysis.hpp"
#include "intopt/batch.hpp"
#include "intopt/bench.hpp"
#include "intopt/config.hpp"
#include "intopt/error.hpp"
#include "intopt/knowledge_base.hpp"
#include "intopt/log.hpp"
#include "intopt/pipeline.hpp"
#include "intopt/process.hpp"
#include "intopt/report.hpp"
#include "intopt/retrieval.hpp"
#include "intopt/verification.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace intopt;

namespace {

struct Globals {
  std::optional<fs::path> config_path;
  bool json = false;
  bool verbose = false;
  bool quiet = false;
};

PipelineConfig load_config(const Globals& g) {
  if (auto path = PipelineConfig::locate(g.config_path)) return PipelineConfig::load(*path);
  return {};
}

std::string built_at_now() {
  std::time_t t;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) t = static_cast<std::time_t>(std::stoll(sde));
  else t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

kb::KnowledgeBase require_kb(const std::optional<fs::path>& cli, const PipelineConfig& cfg) {
  auto path = cli ? cli : cfg.kb_path;
  if (!path) throw Error(ErrorKind::ConfigError, "missing dependency: knowledge base (--kb or kb = ... in config)");
  if (!fs::exists(*path)) throw Error(ErrorKind::ConfigError, "missing dependency: " + path->string());
  return kb::load_kb(*path);
}

analysis::AnalysisNameMap name_map_for(const PipelineConfig& cfg, const std::optional<fs::path>& cli_map) {
  if (cli_map) return analysis::AnalysisNameMap::load(*cli_map);
  if (cfg.analysis_map) return analysis::AnalysisNameMap::load(*cfg.analysis_map, cfg.analysis_map_replace);
  return analysis::AnalysisNameMap::builtin();
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

ojson hits_json(const std::vector<retrieval::RetrievalHit>& hits) {
  ojson arr = ojson::array();
  for (const auto& h : hits)
    arr.push_back({{"rank", h.rank}, {"pass_id", h.pass_id}, {"score", h.score}, {"zero_score", h.zero_score}});
  return arr;
}

// Backends for one command; owns the store and instances.
struct BackendSet {
  std::shared_ptr<llm::TranscriptStore> store;
  std::map<std::string, std::unique_ptr<llm::Backend>> instances;

  BackendSet(const PipelineConfig& cfg, llm::Mode mode, const std::optional<fs::path>& transcripts) {
    if (mode != llm::Mode::Live) {
      auto dir = transcripts ? *transcripts : cfg.transcripts_dir;
      if (mode == llm::Mode::Replay && !fs::is_directory(dir))
        throw Error(ErrorKind::ConfigError, "replay mode: missing dependency " + dir.string());
      store = std::make_shared<llm::TranscriptStore>(dir);
      store->load();
    }
  }

  pipeline::StageBackend get(const PipelineConfig& cfg, const std::string& id, llm::Mode mode) {
    const auto& bc = cfg.backend(id);
    auto& slot = instances[id];
    if (!slot) slot = llm::make_backend(bc, mode, store);
    return {slot.get(), bc};
  }
};

void print_json(const ojson& doc) { std::cout << doc.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intopt: intent-driven LLVM IR optimization toolkit"};
  app.require_subcommand(1);
  Globals g;
  std::string config_str;
  app.add_option("--config", config_str, "TOML config file (default: $INTOPT_CONFIG)");
  app.add_flag("--json", g.json, "Machine-readable output");
  app.add_flag("-v,--verbose", g.verbose, "Log progress to stderr");
  app.add_flag("-q,--quiet", g.quiet, "Only log errors");

  std::function<int()> action;

  // ---- kb build ----
  auto* kb_cmd = app.add_subcommand("kb", "Knowledge base commands");
  kb_cmd->require_subcommand(1);
  auto* kb_build = kb_cmd->add_subcommand("build", "Mine pass descriptions and analysis dependencies from LLVM sources");
  std::string kb_src, kb_docs, kb_out = "kb.json";
  bool kb_cached = false;
  kb_build->add_option("--llvm-src", kb_src, "The llvm/ directory of an LLVM checkout")->required();
  kb_build->add_option("--docs", kb_docs, "Pass documentation (default: <llvm-src>/docs/Passes.rst if present)");
  kb_build->add_option("-o,--output", kb_out, "Output JSON");
  kb_build->add_flag("--include-cached", kb_cached, "Also count getCachedResult<> lookups as dependencies");
  kb_build->callback([&] {
    action = [&] {
      std::string docs;
      fs::path docs_path = kb_docs.empty() ? fs::path(kb_src) / "docs" / "Passes.rst" : fs::path(kb_docs);
      if (!kb_docs.empty() || fs::exists(docs_path)) docs = read_file(docs_path);
      auto kb = kb::build_kb(kb_src, docs, {built_at_now(), kb_cached});
      kb::save_kb(kb, kb_out);
      if (g.json) print_json({{"path", kb_out}, {"entries", kb.entries.size()}, {"llvm_version", kb.llvm_version}});
      else std::cout << "wrote " << kb.entries.size() << " passes to " << kb_out << " (LLVM " << kb.llvm_version << ")\n";
      return 0;
    };
  });

  // ---- retrieve ----
  auto* ret_cmd = app.add_subcommand("retrieve", "Top-m passes for transformation actions");
  std::string ret_kb, ret_strategy;
  std::vector<std::string> ret_queries;
  int ret_m = 0;
  ret_cmd->add_option("--kb", ret_kb, "Knowledge base JSON");
  ret_cmd->add_option("--query", ret_queries, "Action text (repeatable)");
  ret_cmd->add_option("--strategy", ret_strategy, "Strategy JSON; every action becomes a query");
  ret_cmd->add_option("-m", ret_m, "Passes per action (default 3)");
  ret_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config(g);
      auto kb = require_kb(ret_kb.empty() ? std::nullopt : std::optional<fs::path>(ret_kb), cfg);
      auto index = retrieval::TfIdfIndex::build(kb);
      int m = ret_m > 0 ? ret_m : cfg.retrieval_m;
      if (!ret_strategy.empty()) {
        auto strategy = strategy_from_json(read_file(ret_strategy));
        auto res = retrieval::resolve_analysis_set(strategy, index, kb, m);
        if (g.json) {
          ojson doc;
          doc["actions"] = ojson::array();
          for (const auto& a : res.per_action) doc["actions"].push_back({{"query", a.query}, {"hits", hits_json(a.hits)}});
          doc["analyses"] = res.analyses;
          print_json(doc);
        } else {
          std::cout << "query\trank\tpass_id\tscore\tzero_score\n";
          for (const auto& a : res.per_action)
            for (const auto& h : a.hits)
              std::cout << a.query << "\t" << h.rank << "\t" << h.pass_id << "\t" << fixed(h.score, 6) << "\t"
                        << (h.zero_score ? "1" : "0") << "\n";
          std::cout << "# analyses:";
          for (const auto& id : res.analyses) std::cout << " " << id;
          std::cout << "\n";
        }
        return 0;
      }
      if (ret_queries.empty()) throw Error(ErrorKind::Precondition, "give --query or --strategy");
      ojson doc = ojson::array();
      if (!g.json) std::cout << "query\trank\tpass_id\tscore\tzero_score\n";
      for (const auto& q : ret_queries) {
        auto hits = retrieval::retrieve(index, q, m);
        if (g.json) doc.push_back({{"query", q}, {"hits", hits_json(hits)}});
        else
          for (const auto& h : hits)
            std::cout << q << "\t" << h.rank << "\t" << h.pass_id << "\t" << fixed(h.score, 6) << "\t"
                      << (h.zero_score ? "1" : "0") << "\n";
      }
      if (g.json) print_json(doc);
      return 0;
    };
  });

  // ---- analyze ----
  auto* an_cmd = app.add_subcommand("analyze", "Collect compiler analysis output for a program");
  std::string an_ir, an_list, an_strategy, an_kb, an_map;
  int an_m = 0;
  an_cmd->add_option("--ir", an_ir, "Input .ll")->required();
  an_cmd->add_option("--analyses", an_list, "Comma-separated analysis class names");
  an_cmd->add_option("--strategy", an_strategy, "Strategy JSON; analyses come from retrieval");
  an_cmd->add_option("--kb", an_kb, "Knowledge base JSON (with --strategy)");
  an_cmd->add_option("--map", an_map, "Analysis name map JSON overrides");
  an_cmd->add_option("-m", an_m, "Passes per action (default 3)");
  an_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config(g);
      auto program = load_ir(an_ir);
      std::set<std::string> analyses;
      for (const auto& a : split_csv(an_list)) analyses.insert(a);
      if (!an_strategy.empty()) {
        auto kb = require_kb(an_kb.empty() ? std::nullopt : std::optional<fs::path>(an_kb), cfg);
        auto index = retrieval::TfIdfIndex::build(kb);
        auto res = retrieval::resolve_analysis_set(strategy_from_json(read_file(an_strategy)), index, kb,
                                                   an_m > 0 ? an_m : cfg.retrieval_m);
        analyses.insert(res.analyses.begin(), res.analyses.end());
      }
      if (analyses.empty()) throw Error(ErrorKind::Precondition, "give --analyses or --strategy");
      auto map = name_map_for(cfg, an_map.empty() ? std::nullopt : std::optional<fs::path>(an_map));
      auto bundle = analysis::collect_analysis(program, analyses, map, cfg.toolchain, {.timeout = cfg.analysis_timeout});
      if (g.json) {
        ojson doc;
        doc["program"] = bundle.for_program;
        doc["items"] = ojson::array();
        for (const auto& item : bundle.items)
          doc["items"].push_back({{"analysis_id", item.analysis_id},
                                  {"print_pass", item.print_pass},
                                  {"status", analysis::to_string(item.status)},
                                  {"streams", item.streams},
                                  {"payload", item.payload}});
        print_json(doc);
      } else {
        std::cout << analysis::render_bundle(bundle);
      }
      return 0;
    };
  });

  // ---- optimize ----
  auto* opt_cmd = app.add_subcommand("optimize", "Run the three-stage pipeline (or the single-call baseline)");
  std::string op_ir, op_kb, op_backend, op_form_backend, op_mode = "pipeline", op_out, op_strategy, op_llm_mode,
                                                          op_transcripts;
  opt_cmd->add_option("--ir", op_ir, "Input .ll")->required();
  opt_cmd->add_option("--kb", op_kb, "Knowledge base JSON");
  opt_cmd->add_option("--backend", op_backend, "Backend id for refinement and realization (and formulation)");
  opt_cmd->add_option("--formulation-backend", op_form_backend, "Backend id for formulation");
  opt_cmd->add_option("--mode", op_mode, "pipeline or baseline")->check(CLI::IsMember({"pipeline", "baseline"}));
  opt_cmd->add_option("-o,--output", op_out, "Optimized .ll")->required();
  opt_cmd->add_option("--emit-strategy", op_strategy, "Write the refined strategy JSON here");
  opt_cmd->add_option("--llm-mode", op_llm_mode, "live, record or replay (default from config)");
  opt_cmd->add_option("--transcripts", op_transcripts, "Transcript store directory");
  opt_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config(g);
      auto llm_mode = op_llm_mode.empty() ? cfg.llm_mode : llm::mode_from_string(op_llm_mode);
      BackendSet backends(cfg, llm_mode, op_transcripts.empty() ? std::nullopt : std::optional<fs::path>(op_transcripts));
      std::string opt_id = !op_backend.empty() ? op_backend : cfg.optimizer_backend;
      std::string form_id = !op_form_backend.empty() ? op_form_backend
                            : !op_backend.empty()    ? op_backend
                                                     : cfg.formulation_backend;
      auto mode = optimize_mode_from_string(op_mode);
      auto optimizer = backends.get(cfg, opt_id, llm_mode);
      auto formulation = mode == OptimizeMode::Pipeline ? backends.get(cfg, form_id, llm_mode) : optimizer;
      pipeline::PipelineOptions popts;
      popts.token_cap = cfg.token_cap;
      popts.retrieval_m = cfg.retrieval_m;
      popts.collect.timeout = cfg.analysis_timeout;
      pipeline::Pipeline pipe(formulation, optimizer, cfg.toolchain, popts);
      auto program = load_ir(op_ir);
      ojson doc;
      doc["program_id"] = program.id;
      doc["mode"] = op_mode;
      IrProgram optimized;
      if (mode == OptimizeMode::Pipeline) {
        auto kb = require_kb(op_kb.empty() ? std::nullopt : std::optional<fs::path>(op_kb), cfg);
        auto index = retrieval::TfIdfIndex::build(kb);
        auto run = pipe.run(program, kb, index, name_map_for(cfg, std::nullopt));
        optimized = run.optimized;
        doc["initial_actions"] = run.initial.actions.size();
        doc["refined_actions"] = run.refined.actions.size();
        doc["analyses"] = run.resolution.analyses;
        if (!op_strategy.empty()) write_file(op_strategy, strategy_to_json(run.refined) + "\n");
      } else {
        optimized = pipe.baseline(program);
      }
      write_file(op_out, optimized.text);
      doc["output"] = op_out;
      doc["validity"] = optimized.validity == Validity::Valid     ? "valid"
                        : optimized.validity == Validity::Invalid ? "invalid"
                                                                  : "unchecked";
      if (g.json) print_json(doc);
      else std::cout << "wrote " << op_out << " (" << doc["validity"].get<std::string>() << ")\n";
      return 0;
    };
  });

  // ---- verify ----
  auto* ver_cmd = app.add_subcommand("verify", "Check an (unopt, opt) pair: Alive2, then differential fuzzing");
  std::string ve_unopt, ve_opt, ve_harness = "template", ve_work, ve_backend;
  long long ve_runs = 0;
  unsigned ve_seed = 0;
  bool ve_no_alive = false;
  ver_cmd->add_option("--unopt", ve_unopt, "Original .ll")->required();
  ver_cmd->add_option("--opt", ve_opt, "Optimized .ll")->required();
  ver_cmd->add_option("--runs", ve_runs, "Fuzzing iterations (default 200000)");
  ver_cmd->add_option("--seed", ve_seed, "libFuzzer seed (default 1)");
  ver_cmd->add_option("--harness-mode", ve_harness, "template or llm")->check(CLI::IsMember({"template", "llm"}));
  ver_cmd->add_option("--backend", ve_backend, "Backend id for llm harness mode");
  ver_cmd->add_option("--work-dir", ve_work, "Workspace root (default: work)");
  ver_cmd->add_flag("--no-alive", ve_no_alive, "Skip Alive2");
  ver_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config(g);
      auto vc = cfg.verify_config();
      if (ve_runs > 0) vc.fuzz.runs = ve_runs;
      if (ve_seed > 0) vc.fuzz.seed = ve_seed;
      if (!ve_work.empty()) vc.work_root = ve_work;
      vc.use_alive = !ve_no_alive;
      vc.harness_mode = ve_harness == "llm" ? verify::HarnessMode::Llm : verify::HarnessMode::Template;
      std::optional<BackendSet> backends;
      if (vc.harness_mode == verify::HarnessMode::Llm) {
        backends.emplace(cfg, cfg.llm_mode, std::nullopt);
        auto stage = backends->get(cfg, ve_backend.empty() ? cfg.harness_backend : ve_backend, cfg.llm_mode);
        vc.harness_backend = stage.backend;
        vc.harness_backend_config = stage.config;
      }
      IrPair pair{load_ir(ve_unopt), load_ir(ve_opt), PairProvenance::LlmPipeline};
      auto verdict = verify::verify(pair, vc);
      std::cout << verify::verdict_to_json(verdict) << "\n";
      return 0;
    };
  });

  // ---- bench ----
  auto* be_cmd = app.add_subcommand("bench", "Time base vs optimized functions over a fuzzing corpus");
  std::string be_unopt, be_opt, be_corpus, be_work, be_harness;
  long long be_iters = 0;
  int be_warmup = -1;
  be_cmd->add_option("--unopt", be_unopt, "Original .ll")->required();
  be_cmd->add_option("--opt", be_opt, "Optimized .ll")->required();
  be_cmd->add_option("--corpus", be_corpus, "Corpus directory (e.g. work/<id>/corpus)")->required();
  be_cmd->add_option("--iters", be_iters, "Timed iterations per input (default 10000)");
  be_cmd->add_option("--warmup", be_warmup, "Untimed warmup iterations (default 1000)");
  be_cmd->add_option("--harness", be_harness, "Fuzz harness to transform (default: template harness)");
  be_cmd->add_option("--work-dir", be_work, "Build directory (default: work/<id>/bench)");
  be_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config(g);
      IrPair pair{load_ir(be_unopt), load_ir(be_opt), PairProvenance::LlmPipeline};
      auto merged = verify::merge_for_diff(pair);
      verify::FuzzHarness harness = be_harness.empty()
                                        ? verify::template_harness(merged)
                                        : verify::FuzzHarness{read_file(be_harness), {}, verify::HarnessProvenance::LlmGenerated};
      int warmup = be_warmup >= 0 ? be_warmup : cfg.bench_warmup;
      auto bench_src = bench::fuzz_to_bench(harness, warmup);
      fs::path workdir = be_work.empty() ? cfg.work_dir / pair.unopt.id / "bench" : fs::path(be_work);
      auto binary = bench::build_bench(merged, bench_src, cfg.toolchain, workdir);
      auto perf = bench::run_bench(binary, be_corpus, be_iters > 0 ? be_iters : cfg.bench_iters);
      perf.program_id = pair.unopt.id;
      perf.warmup_iters = warmup;
      std::cout << bench::perf_to_json(perf) << "\n";
      return 0;
    };
  });

  // ---- report ----
  auto* rep_cmd = app.add_subcommand("report", "Aggregate results.jsonl into the evaluation table");
  std::string rp_results, rp_compare, rp_csv, rp_label = "IntOpt", rp_compare_label = "other";
  double rp_low = 0.98, rp_high = 1.02;
  rep_cmd->add_option("--results", rp_results, "results.jsonl")->required();
  rep_cmd->add_option("--compare", rp_compare, "Second results.jsonl for a win/tie/loss comparison");
  rep_cmd->add_option("--csv", rp_csv, "Write per-program CSV here");
  rep_cmd->add_option("--label", rp_label, "Row label for --results");
  rep_cmd->add_option("--compare-label", rp_compare_label, "Label for --compare");
  rep_cmd->add_option("--band-low", rp_low, "Lower end of the equal band (inclusive)");
  rep_cmd->add_option("--band-high", rp_high, "Upper end of the equal band (inclusive)");
  rep_cmd->callback([&] {
    action = [&] {
      auto results = report::load_results(rp_results);
      auto rep = report::aggregate(results);
      if (!rp_csv.empty()) write_file(rp_csv, report::render_csv(results));
      std::optional<report::PairwiseResult> cmp;
      report::Band band{rp_low, rp_high};
      if (!rp_compare.empty()) {
        auto other = report::aggregate(report::load_results(rp_compare));
        cmp = report::compare_pairwise(rep.per_program, other.per_program, band);
      }
      if (g.json) {
        ojson doc = ojson::parse(report::render_json(rep));
        if (cmp) doc["comparison"] = ojson::parse(report::render_pairwise_json(*cmp, band));
        print_json(doc);
      } else {
        std::cout << report::render_markdown(rep, rp_label);
        if (cmp) std::cout << "\n" << report::render_pairwise_markdown(*cmp, rp_label, rp_compare_label, band);
        std::cout << "\n" << report::render_json(rep) << "\n";
      }
      return 0;
    };
  });

  // ---- distill ----
  auto* di_cmd = app.add_subcommand("distill", "Infer the strategy behind an -O3 pair and append a training triple");
  std::string di_unopt, di_opt, di_backend, di_out = "dataset.jsonl", di_llm_mode, di_transcripts;
  di_cmd->add_option("--unopt", di_unopt, "Original .ll")->required();
  di_cmd->add_option("--opt", di_opt, "Its -O3 output (default: run opt -O3)");
  di_cmd->add_option("--backend", di_backend, "Backend id");
  di_cmd->add_option("-o,--output", di_out, "Dataset JSONL (appended)");
  di_cmd->add_option("--llm-mode", di_llm_mode, "live, record or replay");
  di_cmd->add_option("--transcripts", di_transcripts, "Transcript store directory");
  di_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config(g);
      auto llm_mode = di_llm_mode.empty() ? cfg.llm_mode : llm::mode_from_string(di_llm_mode);
      BackendSet backends(cfg, llm_mode, di_transcripts.empty() ? std::nullopt : std::optional<fs::path>(di_transcripts));
      auto stage = backends.get(cfg, di_backend.empty() ? cfg.formulation_backend : di_backend, llm_mode);
      pipeline::PipelineOptions popts;
      popts.token_cap = cfg.token_cap;
      pipeline::Pipeline pipe(stage, stage, cfg.toolchain, popts);
      auto unopt = load_ir(di_unopt);
      auto opt = di_opt.empty() ? compile_o3_reference(unopt, cfg.toolchain) : load_ir(di_opt);
      opt.origin = IrOrigin::O3Reference;
      auto triple = pipe.distill({unopt, opt, PairProvenance::CompilerO3});
      std::ofstream out(di_out, std::ios::app | std::ios::binary);
      if (!out) throw Error(ErrorKind::IoError, "cannot append to " + di_out);
      out << pipeline::triple_to_jsonl(triple) << "\n";
      if (g.json) print_json({{"output", di_out}, {"actions", triple.strategy.actions.size()}});
      else std::cout << "appended " << triple.strategy.actions.size() << "-step strategy to " << di_out << "\n";
      return 0;
    };
  });

  // ---- batch ----
  auto* ba_cmd = app.add_subcommand("batch", "optimize -> verify -> bench over many programs");
  std::string ba_manifest, ba_results = "results.jsonl", ba_mode, ba_opt_mode, ba_out_dir, ba_kb;
  std::vector<std::string> ba_programs;
  bool ba_resume = false;
  int ba_workers = 0;
  ba_cmd->add_option("programs", ba_programs, "IR files");
  ba_cmd->add_option("--manifest", ba_manifest, "File listing IR paths, one per line");
  ba_cmd->add_option("--results", ba_results, "Output JSONL");
  ba_cmd->add_option("--mode", ba_mode, "LLM mode: live, record or replay")
      ->check(CLI::IsMember({"live", "record", "replay"}));
  ba_cmd->add_option("--optimize-mode", ba_opt_mode, "pipeline or baseline")
      ->check(CLI::IsMember({"pipeline", "baseline"}));
  ba_cmd->add_option("--out-dir", ba_out_dir, "Keep optimized IR and strategies here");
  ba_cmd->add_option("--kb", ba_kb, "Knowledge base JSON");
  ba_cmd->add_option("--workers", ba_workers, "Concurrent programs");
  ba_cmd->add_flag("--resume", ba_resume, "Skip programs already in the results file");
  ba_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config(g);
      if (!ba_mode.empty()) cfg.llm_mode = llm::mode_from_string(ba_mode);
      if (!ba_opt_mode.empty()) cfg.optimize_mode = optimize_mode_from_string(ba_opt_mode);
      if (ba_workers > 0) cfg.workers = ba_workers;
      if (!ba_kb.empty()) cfg.kb_path = ba_kb;
      std::vector<fs::path> programs;
      if (!ba_manifest.empty()) programs = batch::read_manifest(ba_manifest);
      for (const auto& p : ba_programs) programs.emplace_back(p);
      if (programs.empty()) throw Error(ErrorKind::ConfigError, "no programs given (--manifest or positional paths)");
      batch::BatchOptions options;
      options.results = ba_results;
      options.resume = ba_resume;
      if (!ba_out_dir.empty()) options.out_dir = fs::path(ba_out_dir);
      auto summary = batch::run_batch(programs, cfg, options);
      if (g.json)
        print_json({{"total", summary.total}, {"resumed", summary.resumed}, {"ok", summary.ok}, {"failed", summary.failed},
                    {"results", ba_results}});
      else
        std::cout << summary.total << " programs: " << summary.ok << " ok, " << summary.failed << " failed, "
                  << summary.resumed << " already done -> " << ba_results << "\n";
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (!config_str.empty()) g.config_path = fs::path(config_str);
  log::set_level(g.verbose ? log::Level::Info : g.quiet ? log::Level::Error : log::Level::Warning);

  try {
    return action ? action() : 0;
  } catch (const Error& e) {
    std::cerr << "intopt: error: " << e.what() << "\n";
    if (g.verbose && !e.detail().empty()) std::cerr << e.detail() << "\n";
    return e.kind() == ErrorKind::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "intopt: error: " << e.what() << "\n";
    return 1;
  }
}
