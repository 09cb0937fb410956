#include "test_support.hpp"

#include "intopt/error.hpp"
#include "intopt/knowledge_base.hpp"
#include "intopt/pipeline.hpp"
#include "intopt/process.hpp"
#include "intopt/prompts.hpp"

#include <doctest.h>
#include <json.hpp>

#include <deque>

using namespace intopt;
using namespace intopt::pipeline;
namespace fs = std::filesystem;

namespace {

std::string golden(const std::string& name) { return read_file(test_support::fixtures() / "prompts" / (name + ".txt")); }
std::string response(const std::string& name) {
  return read_file(test_support::fixtures() / "llm" / "responses" / (name + ".txt"));
}

// Hands out canned responses in order and keeps every request.
class ScriptedBackend final : public llm::Backend {
 public:
  explicit ScriptedBackend(std::deque<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const llm::LlmRequest& request) override {
    requests.push_back(request);
    if (replies_.empty()) throw Error(ErrorKind::BackendUnavailable, "script exhausted");
    auto r = replies_.front();
    replies_.pop_front();
    return r;
  }
  std::vector<llm::LlmRequest> requests;

 private:
  std::deque<std::string> replies_;
};

StageBackend stage(llm::Backend& b, const std::string& id) {
  llm::BackendConfig c;
  c.id = id;
  return {&b, c};
}

}  // namespace

TEST_CASE("stage prompts match the goldens byte for byte") {
  const auto& set = prompts::StagePromptSet::defaults();
  CHECK(prompts::render_formulation(set, "(Unopt Input LLVM IR)") == golden("formulation"));
  CHECK(prompts::render_refinement(set, "(Unopt LLVM IR)", "(Initial Strategy)", "(Compiler Analysis)") ==
        golden("refinement"));
  CHECK(prompts::render_realization(set, "(Unopt LLVM IR)", "(Refined Strategy)", "(Compiler Analysis)") ==
        golden("realization"));
  CHECK(prompts::render_baseline(set, "(Unopt LLVM IR)") == golden("baseline"));
  CHECK(set.harness == golden("harness"));
}

TEST_CASE("render substitutes slots once and rejects unknown ones") {
  CHECK(prompts::render("a {x} b {y}", {{"x", "{y}"}, {"y", "2"}}) == "a {y} b 2");
  CHECK(prompts::render("{notaslot and braces}", {}) == "{notaslot and braces}");
  CHECK_THROWS_AS(prompts::render("a {x}", {}), Error);
  const auto& set = prompts::StagePromptSet::defaults();
  auto p = prompts::render_harness(set, "define i32 @f() { ret i32 {0} }");
  CHECK(p.find("define i32 @f() { ret i32 {0} }") != std::string::npos);
  CHECK(p.find("{ll_text}") == std::string::npos);
  auto d = prompts::render_distillation(set, "UNOPT-TEXT", "OPT-TEXT");
  CHECK(d.find("UNOPT-TEXT") != std::string::npos);
  CHECK(d.find("OPT-TEXT") != std::string::npos);
}

TEST_CASE("extract_tag") {
  CHECK(extract_tag("x <a>1</a> <a>2</a>", "a") == "1");
  CHECK(extract_tag("<a>out <a>in</a> tail</a>", "a") == "out <a>in</a> tail");
  bool unterminated = false;
  CHECK_FALSE(extract_tag("<a>never closed", "a", &unterminated));
  CHECK(unterminated);
  CHECK_FALSE(extract_tag("nothing", "a", &unterminated));
  CHECK_FALSE(unterminated);
  int count = 0;
  extract_tag("<a>1</a><a>2</a><a>3</a>", "a", nullptr, &count);
  CHECK(count == 3);
}

TEST_CASE("parse_steps") {
  auto steps = parse_steps(
      "<step>\n**Transformation**: Loop unrolling\n**Change**: Unroll by four\n</step>\n"
      "<step>**Transformation**: missing change</step>\n"
      "<step>\n**Transformation**: mem2reg\n**Change**: Promote allocas\nto registers\n</step>");
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].transformation == "Loop unrolling");
  CHECK(steps[0].change == "Unroll by four");
  CHECK(steps[0].query_text() == "Loop unrolling: Unroll by four");
  CHECK(steps[1].transformation == "mem2reg");
  CHECK(steps[1].change.find("Promote allocas") == 0);
}

TEST_CASE("parse_advice_actions") {
  auto a = parse_advice_actions("Plan:\n- First thing\n  - detail a\n  - detail b\n* Second thing\n\n- Third\n");
  REQUIRE(a.size() == 3);
  CHECK(a[0].transformation == "First thing");
  CHECK(a[0].change.find("detail a") != std::string::npos);
  CHECK(a[1].transformation == "Second thing");
  CHECK(a[2].transformation == "Third");

  auto p = parse_advice_actions("Unroll the loop.\n\nThen fold constants\nacross blocks.\n");
  REQUIRE(p.size() == 2);
  CHECK(p[1].transformation == "Then fold constants across blocks");

  auto refined = parse_refined_strategy(response("chocolateFeast.refinement"));
  CHECK(refined.stage == StrategyStage::Refined);
  CHECK(refined.actions.size() == 5);
  CHECK(refined.actions[0].transformation == "Promote all stack-allocated scalars to SSA (mem2reg)");
}

TEST_CASE("strategy parsing errors") {
  auto check_kind = [](auto fn, ErrorKind kind) {
    try {
      fn();
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
      CHECK_FALSE(e.detail().empty());
    }
  };
  check_kind([] { parse_initial_strategy("no steps at all"); }, ErrorKind::MalformedStrategy);
  check_kind([] { parse_initial_strategy("<code>define i32 @f() {\n  ret i32 0\n}</code>"); },
             ErrorKind::MalformedStrategy);
  check_kind([] { parse_refined_strategy("<advice>- a"); }, ErrorKind::MalformedStrategy);
  check_kind([] { parse_refined_strategy("<advice>   </advice>"); }, ErrorKind::MalformedStrategy);
  check_kind([] { extract_code("just text"); }, ErrorKind::NoCodeRegion);
  check_kind([] { extract_code("<code>\n\n</code>"); }, ErrorKind::NoCodeRegion);

  // Without a <code> region the whole response is scanned.
  auto s = parse_initial_strategy("<step>\n**Transformation**: A\n**Change**: B\n</step>");
  CHECK(s.actions.size() == 1);
  CHECK(s.stage == StrategyStage::Initial);
}

TEST_CASE("extract_code strips fences and normalizes the trailing newline") {
  CHECK(extract_code("<code>\n```llvm\ndefine void @f() {\n  ret void\n}\n```\n</code>") ==
        "define void @f() {\n  ret void\n}\n");
  CHECK(extract_code("before <code>  x  </code> <code>y</code>") == "x\n");
}

TEST_CASE("strategy json round-trip") {
  auto s = parse_initial_strategy(response("chocolateFeast.formulation"));
  auto back = strategy_from_json(strategy_to_json(s));
  CHECK(back.actions.size() == s.actions.size());
  CHECK(back.actions[0].transformation == s.actions[0].transformation);
  CHECK(back.raw_text == s.raw_text);
  CHECK_THROWS_AS(strategy_from_json("{\"actions\": 3}"), Error);
}

TEST_CASE("the pipeline threads one analysis bundle through refinement and realization") {
  auto program = load_ir(test_support::fixtures() / "ir" / "chocolateFeast.ll");
  auto kb = kb::load_kb(test_support::fixtures() / "e2e" / "kb.json");
  auto index = retrieval::TfIdfIndex::build(kb);
  ScriptedBackend formulation({response("chocolateFeast.formulation")});
  ScriptedBackend optimizer({response("chocolateFeast.refinement"), response("chocolateFeast.realization")});
  Pipeline p(stage(formulation, "f"), stage(optimizer, "o"), test_support::fake_toolchain());

  auto run = p.run(program, kb, index, analysis::AnalysisNameMap::builtin());
  REQUIRE(formulation.requests.size() == 1);
  REQUIRE(optimizer.requests.size() == 2);
  CHECK(formulation.requests[0].backend_id == "f");
  CHECK(formulation.requests[0].prompt == prompts::render_formulation(prompts::StagePromptSet::defaults(), program.text));
  CHECK(optimizer.requests[0].purpose == llm::Purpose::Refinement);
  CHECK(optimizer.requests[1].purpose == llm::Purpose::Realization);

  CHECK(run.initial.stage == StrategyStage::Initial);
  CHECK(run.refined.stage == StrategyStage::Refined);
  CHECK(run.resolution.analyses.contains("LoopAnalysis"));
  CHECK(run.resolution.per_action.size() == run.initial.actions.size());

  auto rendered = analysis::render_bundle(run.bundle);
  CHECK_FALSE(rendered.empty());
  CHECK(optimizer.requests[0].prompt ==
        prompts::render_refinement(prompts::StagePromptSet::defaults(), program.text, run.initial.raw_text, rendered));
  CHECK(optimizer.requests[1].prompt ==
        prompts::render_realization(prompts::StagePromptSet::defaults(), program.text, run.refined.raw_text, rendered));

  CHECK(run.optimized.origin == IrOrigin::LlmGenerated);
  CHECK(run.optimized.id == "chocolateFeast");
  CHECK(run.optimized.validity == Validity::Valid);
  CHECK(run.optimized.text.find("define") != std::string::npos);
}

TEST_CASE("pipeline preconditions") {
  auto program = load_ir(test_support::fixtures() / "ir" / "chocolateFeast.ll");
  ScriptedBackend b({});
  CHECK_THROWS_AS(Pipeline(StageBackend{}, stage(b, "o"), test_support::fake_toolchain()), Error);

  PipelineOptions small;
  small.token_cap = 10;
  Pipeline capped(stage(b, "f"), stage(b, "o"), test_support::fake_toolchain(), small);
  try {
    capped.formulate(program);
    FAIL("expected OverCap");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OverCap);
  }
  CHECK(b.requests.empty());

  Pipeline p(stage(b, "f"), stage(b, "o"), test_support::fake_toolchain());
  auto broken = load_ir(test_support::fixtures() / "ir" / "broken.ll");
  CHECK_THROWS_AS(p.formulate(broken), Error);
  CHECK(b.requests.empty());

  OptimizationStrategy refined;
  refined.stage = StrategyStage::Refined;
  CHECK_THROWS_AS(p.refine(program, refined, {}), Error);
  CHECK_THROWS_AS(p.realize(program, OptimizationStrategy{}, {}), Error);
}

TEST_CASE("baseline mode makes one realization call") {
  auto program = load_ir(test_support::fixtures() / "ir" / "numberOfOperations.ll");
  ScriptedBackend b({response("numberOfOperations.baseline")});
  Pipeline p(stage(b, "f"), stage(b, "o"), test_support::fake_toolchain());
  auto out = p.baseline(program);
  REQUIRE(b.requests.size() == 1);
  CHECK(b.requests[0].prompt == prompts::render_baseline(prompts::StagePromptSet::defaults(), program.text));
  CHECK(out.text.find("define") != std::string::npos);
}

TEST_CASE("distillation pairs -O3 output with a strategy") {
  auto unopt = load_ir(test_support::fixtures() / "ir" / "chocolateFeast.ll");
  auto opt = load_ir(test_support::fixtures() / "ir" / "chocolateFeast.O3.ll");
  IrPair pair{unopt, opt, PairProvenance::CompilerO3};
  ScriptedBackend b({response("chocolateFeast.distillation")});
  Pipeline p(stage(b, "f"), stage(b, "o"), test_support::fake_toolchain());
  auto triple = p.distill(pair);
  CHECK_FALSE(triple.strategy.actions.empty());
  CHECK(b.requests[0].purpose == llm::Purpose::Distillation);
  auto line = triple_to_jsonl(triple);
  CHECK(line.find('\n') == std::string::npos);
  auto j = nlohmann::json::parse(line);
  CHECK(j["unopt"] == unopt.text);
  CHECK(j["opt"] == opt.text);
  CHECK(j["strategy"]["actions"].size() == triple.strategy.actions.size());

  pair.provenance = PairProvenance::LlmPipeline;
  CHECK_THROWS_AS(p.distill(pair), Error);
}
