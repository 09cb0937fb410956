#pragma once

#include "intopt/analysis.hpp"
#include "intopt/ir_corpus.hpp"
#include "intopt/knowledge_base.hpp"
#include "intopt/llm.hpp"
#include "intopt/prompts.hpp"
#include "intopt/retrieval.hpp"
#include "intopt/strategy.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace intopt::pipeline {

// First well-nested <tag>...</tag> region. Returns nullopt when there is no
// opening tag; sets *unterminated when an opening tag never closes.
std::optional<std::string> extract_tag(std::string_view text, std::string_view tag, bool* unterminated = nullptr,
                                       int* region_count = nullptr);

// <step> blocks with **Transformation** / **Change** fields.
std::vector<TransformationAction> parse_steps(std::string_view text);

// Top-level bullets (or paragraphs when there are none) of a refined advice block.
std::vector<TransformationAction> parse_advice_actions(std::string_view advice);

// Throws MalformedStrategy; the response is attached as the error detail.
OptimizationStrategy parse_initial_strategy(std::string_view response);
OptimizationStrategy parse_refined_strategy(std::string_view response);

// Contents of the first <code> region with markdown fences removed and a
// single trailing newline. Throws NoCodeRegion.
std::string extract_code(std::string_view response);

struct StageBackend {
  llm::Backend* backend = nullptr;
  llm::BackendConfig config;
};

struct PipelineOptions {
  std::size_t token_cap = kDefaultTokenCap;
  bool validate_input = true;   // run the IR verifier on inputs (needs opt)
  bool validate_output = true;  // attach a verifier verdict to realized IR when opt is available
  int retrieval_m = 3;
  analysis::CollectOptions collect;
};

struct DistilledTriple {
  IrPair pair;
  OptimizationStrategy strategy;
};

// One {unopt, opt, strategy} JSON object, no trailing newline.
std::string triple_to_jsonl(const DistilledTriple& triple);

struct PipelineRun {
  OptimizationStrategy initial;
  retrieval::AnalysisResolution resolution;
  analysis::AnalysisBundle bundle;
  OptimizationStrategy refined;
  IrProgram optimized;
};

class Pipeline {
 public:
  // The formulation stage may use a different model from refinement and realization.
  Pipeline(StageBackend formulation, StageBackend optimizer, ToolchainConfig toolchain, PipelineOptions options = {},
           const prompts::StagePromptSet& prompts = prompts::StagePromptSet::defaults());

  OptimizationStrategy formulate(const IrProgram& program) const;
  OptimizationStrategy refine(const IrProgram& program, const OptimizationStrategy& strategy,
                              const analysis::AnalysisBundle& bundle) const;
  IrProgram realize(const IrProgram& program, const OptimizationStrategy& strategy,
                    const analysis::AnalysisBundle& bundle) const;
  IrProgram baseline(const IrProgram& program) const;
  DistilledTriple distill(const IrPair& pair) const;

  // formulate -> retrieve -> collect analyses -> refine -> realize. The bundle
  // computed from the initial strategy feeds both later stages.
  PipelineRun run(const IrProgram& program, const kb::KnowledgeBase& kb, const retrieval::TfIdfIndex& index,
                  const analysis::AnalysisNameMap& name_map) const;

  const PipelineOptions& options() const { return options_; }

 private:
  void check_input(const IrProgram& program) const;
  std::string call(const StageBackend& stage, std::string prompt, llm::Purpose purpose) const;
  IrProgram finish_ir(const IrProgram& source, std::string text) const;

  StageBackend formulation_;
  StageBackend optimizer_;
  ToolchainConfig toolchain_;
  PipelineOptions options_;
  prompts::StagePromptSet prompts_;
};

}  // namespace intopt::pipeline
