#pragma once

#include <map>
#include <string>
#include <string_view>

namespace intopt::prompts {

// Slots are written {name}; rendering replaces only known slot names in the
// template, in one pass, so braces inside slot values are never expanded.
struct StagePromptSet {
  std::string formulation;   // {ir}
  std::string refinement;    // {code} {advice} {analysis}
  std::string realization;   // {code} {advice} {analysis}
  std::string baseline;      // {code}
  std::string distillation;  // {ir} {code}
  std::string harness;       // {ll_text}

  static const StagePromptSet& defaults();
};

// Throws Precondition when the template names a slot missing from `slots`.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots);

std::string render_formulation(const StagePromptSet& set, std::string_view ir);
std::string render_refinement(const StagePromptSet& set, std::string_view ir, std::string_view advice,
                              std::string_view analysis);
std::string render_realization(const StagePromptSet& set, std::string_view ir, std::string_view advice,
                               std::string_view analysis);
std::string render_baseline(const StagePromptSet& set, std::string_view ir);
std::string render_distillation(const StagePromptSet& set, std::string_view unopt, std::string_view opt);
std::string render_harness(const StagePromptSet& set, std::string_view ll_text);

}  // namespace intopt::prompts
