#include "intopt/prompts.hpp"

#include "intopt/error.hpp"

#include <cctype>

namespace intopt::prompts {
namespace {

constexpr std::string_view kFormulation =
    "[INST]Given the following LLVM IR, propose key optimization transformation steps to outperform LLVM -O3.\n"
    "Write your answer inside a single <code>...</code> block.\n"
    "Inside <code>, write ONLY <step></step> blocks.\n"
    "Each step MUST follow this format:\n"
    "<step>\n"
    "**Transformation**: [Brief name of the optimization]\n"
    "**Change**: [A short description of the change applied to the code]\n"
    "</step>\n"
    "Do NOT output optimized IR.\n"
    "\n"
    "<ir>{ir}</ir>\n"
    "[\\INST]";

constexpr std::string_view kRefinement =
    "Please optimize the following code to outperform LLVM -O3.\n"
    "<code>{code}</code>\n"
    "\n"
    "You may refer to the following advice, but feel free to adapt, extend, or deviate from it as you see fit.\n"
    "<advice>{advice}</advice>\n"
    "\n"
    "The corresponding analysis info is below.\n"
    "<analysis>{analysis}</analysis>\n"
    "\n"
    "You need to keep boundary checks. Please output the final optimization advice wrapped in <advice>...</advice>.";

constexpr std::string_view kRealization =
    "Please optimize the following code to outperform LLVM -O3.\n"
    "<code>{code}</code>\n"
    "\n"
    "You can refer to the following advice.\n"
    "<advice>{advice}</advice>\n"
    "\n"
    "The corresponding analysis info is below.\n"
    "<analysis>{analysis}</analysis>\n"
    "\n"
    "You need to keep boundary checks. Please output the full optimized LLVM IR wrapped in <code>...</code>.";

constexpr std::string_view kBaseline =
    "Please optimize the following code to outperform LLVM -O3.\n"
    "<code>{code}</code>\n"
    "\n"
    "You need to keep boundary checks. Please output the full optimized LLVM IR wrapped in <code>...</code>.";

// Our own wording; mirrors the formulation contract but shows both sides.
constexpr std::string_view kDistillation =
    "[INST]Given the following unoptimized LLVM IR and the IR that LLVM -O3 produced from it, describe the key "
    "optimization transformation steps that turn the first into the second.\n"
    "Write your answer inside a single <code>...</code> block.\n"
    "Inside <code>, write ONLY <step></step> blocks.\n"
    "Each step MUST follow this format:\n"
    "<step>\n"
    "**Transformation**: [Brief name of the optimization]\n"
    "**Change**: [A short description of the change applied to the code]\n"
    "</step>\n"
    "Do NOT output optimized IR.\n"
    "\n"
    "<ir>{ir}</ir>\n"
    "\n"
    "<optimized>{code}</optimized>\n"
    "[\\INST]";

constexpr std::string_view kHarness =
    "You are generating a C++ libFuzzer harness file named fuzz.cc.\n"
    "\n"
    "Input:\n"
    "- A single LLVM IR (.ll) file contains multiple function definitions.\n"
    "- Functions that should be differentially fuzzed appear as pairs:\n"
    "  - base: <name>\n"
    "  - opt : <name>_opt\n"
    "  Both have identical signatures.\n"
    "- The .ll file will be compiled and linked together with fuzz.cc into one binary.\n"
    "\n"
    "Task:\n"
    "Generate fuzz.cc that performs differential fuzzing between each (base,opt) pair.\n"
    "\n"
    "Hard requirements:\n"
    "1) Output ONLY valid C++ code for fuzz.cc. No markdown fences. No explanations.\n"
    "2) Include necessary #includes.\n"
    "\n"
    "LLVM IR content: {ll_text}";

bool slot_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

const StagePromptSet& StagePromptSet::defaults() {
  static const StagePromptSet set{std::string(kFormulation), std::string(kRefinement), std::string(kRealization),
                                  std::string(kBaseline),    std::string(kDistillation), std::string(kHarness)};
  return set;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      size_t j = i + 1;
      while (j < tmpl.size() && slot_char(tmpl[j])) ++j;
      if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
        std::string name(tmpl.substr(i + 1, j - i - 1));
        auto it = slots.find(name);
        if (it == slots.end()) throw Error(ErrorKind::Precondition, "no value for prompt slot {" + name + "}");
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string render_formulation(const StagePromptSet& set, std::string_view ir) {
  return render(set.formulation, {{"ir", std::string(ir)}});
}

std::string render_refinement(const StagePromptSet& set, std::string_view ir, std::string_view advice,
                              std::string_view analysis) {
  return render(set.refinement,
                {{"code", std::string(ir)}, {"advice", std::string(advice)}, {"analysis", std::string(analysis)}});
}

std::string render_realization(const StagePromptSet& set, std::string_view ir, std::string_view advice,
                               std::string_view analysis) {
  return render(set.realization,
                {{"code", std::string(ir)}, {"advice", std::string(advice)}, {"analysis", std::string(analysis)}});
}

std::string render_baseline(const StagePromptSet& set, std::string_view ir) {
  return render(set.baseline, {{"code", std::string(ir)}});
}

std::string render_distillation(const StagePromptSet& set, std::string_view unopt, std::string_view opt) {
  return render(set.distillation, {{"ir", std::string(unopt)}, {"code", std::string(opt)}});
}

std::string render_harness(const StagePromptSet& set, std::string_view ll_text) {
  return render(set.harness, {{"ll_text", std::string(ll_text)}});
}

}  // namespace intopt::prompts
