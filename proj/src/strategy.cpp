#include "intopt/strategy.hpp"

#include "intopt/error.hpp"

#include <json.hpp>

namespace intopt {

std::string TransformationAction::query_text() const {
  if (change.empty() || change == transformation) return transformation;
  return transformation + ": " + change;
}

std::string_view to_string(StrategyStage stage) { return stage == StrategyStage::Initial ? "initial" : "refined"; }

std::string strategy_to_json(const OptimizationStrategy& strategy, int indent) {
  nlohmann::ordered_json doc;
  doc["stage"] = to_string(strategy.stage);
  doc["actions"] = nlohmann::ordered_json::array();
  for (const auto& a : strategy.actions)
    doc["actions"].push_back({{"transformation", a.transformation}, {"change", a.change}});
  doc["raw_text"] = strategy.raw_text;
  return doc.dump(indent);
}

OptimizationStrategy strategy_from_json(std::string_view json_text) {
  try {
    auto doc = nlohmann::json::parse(json_text);
    OptimizationStrategy s;
    auto stage = doc.at("stage").get<std::string>();
    if (stage != "initial" && stage != "refined") throw Error(ErrorKind::ParseError, "unknown strategy stage " + stage);
    s.stage = stage == "initial" ? StrategyStage::Initial : StrategyStage::Refined;
    for (const auto& a : doc.at("actions")) {
      TransformationAction action;
      action.transformation = a.at("transformation").get<std::string>();
      action.change = a.value("change", std::string());
      action.raw = action.query_text();
      s.actions.push_back(std::move(action));
    }
    s.raw_text = doc.value("raw_text", std::string());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed strategy file: ") + e.what());
  }
}

}  // namespace intopt
