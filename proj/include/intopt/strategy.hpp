#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace intopt {

struct TransformationAction {
  std::string transformation;  // short name
  std::string change;          // one-line description
  std::string raw;             // verbatim step / bullet text

  // Text used as the retrieval query for this action.
  std::string query_text() const;

  bool operator==(const TransformationAction&) const = default;
};

enum class StrategyStage { Initial, Refined };

std::string_view to_string(StrategyStage stage);

struct OptimizationStrategy {
  std::vector<TransformationAction> actions;
  StrategyStage stage = StrategyStage::Initial;
  std::string raw_text;  // verbatim model output region

  bool operator==(const OptimizationStrategy&) const = default;
};

// {stage, actions: [{transformation, change}], raw_text}
std::string strategy_to_json(const OptimizationStrategy& strategy, int indent = 2);
OptimizationStrategy strategy_from_json(std::string_view json_text);

}  // namespace intopt
