#include "intopt/pipeline.hpp"

#include "intopt/error.hpp"
#include "intopt/log.hpp"

#include <json.hpp>

#include <regex>
#include <sstream>

namespace intopt::pipeline {
namespace {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
  }
  return out;
}

bool contains_ir_definition(std::string_view text) {
  static const std::regex re(R"((^|\n)[ \t]*define[ \t][^\n]*@)");
  return std::regex_search(text.begin(), text.end(), re);
}

// Value of a **Field**: line, ending at the next field marker or end of block.
std::string step_field(const std::string& block, const std::string& field) {
  std::regex re("\\*{0,2}" + field + "\\*{0,2}[ \\t]*:[ \\t]*(\\*{0,2})");
  std::smatch m;
  if (!std::regex_search(block, m, re)) return {};
  size_t begin = m.position(0) + m.length(0);
  static const std::regex next(R"(\*{0,2}(Transformation|Change)\*{0,2}[ \t]*:)");
  std::smatch n;
  std::string rest = block.substr(begin);
  size_t end = rest.size();
  if (std::regex_search(rest, n, next)) end = n.position(0);
  return collapse_ws(trim(rest.substr(0, end)));
}

struct BulletLine {
  size_t indent = 0;
  bool bullet = false;
  std::string text;  // without the marker
};

BulletLine classify_line(std::string_view line) {
  static const std::regex marker(R"(^([-*+]|\xE2\x80\xA2|\d+[.)])[ \t]+)");
  BulletLine out;
  while (out.indent < line.size() && (line[out.indent] == ' ' || line[out.indent] == '\t')) ++out.indent;
  std::string body(line.substr(out.indent));
  std::smatch m;
  if (std::regex_search(body, m, marker)) {
    out.bullet = true;
    out.text = trim(body.substr(m.length(0)));
  } else {
    out.text = trim(body);
  }
  return out;
}

// Splits a bullet head into (first sentence, remainder). The sentence ends at
// '.' or ':' followed by whitespace or the end of the text.
std::pair<std::string, std::string> split_sentence(const std::string& text) {
  for (size_t i = 0; i < text.size(); ++i) {
    if ((text[i] == '.' || text[i] == ':') &&
        (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      std::string head = trim(std::string_view(text).substr(0, text[i] == '.' ? i + 1 : i));
      if (!head.empty() && head.back() == '.') head.pop_back();
      return {head, trim(std::string_view(text).substr(i + 1))};
    }
  }
  return {trim(text), {}};
}

TransformationAction make_action(const std::string& head, const std::vector<std::string>& details,
                                 const std::string& raw) {
  auto [transformation, change] = split_sentence(head);
  for (const auto& d : details) {
    if (d.empty()) continue;
    if (!change.empty()) change += ' ';
    change += d;
  }
  TransformationAction action;
  action.transformation = collapse_ws(transformation);
  action.change = change.empty() ? action.transformation : collapse_ws(change);
  action.raw = raw;
  return action;
}

std::string strip_fences(std::string text) {
  std::string t = trim(text);
  if (t.rfind("```", 0) != 0) return text;
  auto first_nl = t.find('\n');
  if (first_nl == std::string::npos) return text;
  std::string body = t.substr(first_nl + 1);
  auto last = body.rfind("```");
  if (last != std::string::npos && trim(std::string_view(body).substr(last + 3)).empty()) body.resize(last);
  log::info("stripped markdown fences inside <code>");
  return body;
}

}  // namespace

std::optional<std::string> extract_tag(std::string_view text, std::string_view tag, bool* unterminated,
                                       int* region_count) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  if (unterminated) *unterminated = false;
  std::optional<std::string> first;
  int regions = 0;
  size_t pos = 0;
  while (true) {
    size_t start = text.find(open, pos);
    if (start == std::string_view::npos) break;
    size_t depth = 1, cur = start + open.size();
    size_t end = std::string_view::npos;
    while (depth > 0) {
      size_t o = text.find(open, cur), c = text.find(close, cur);
      if (c == std::string_view::npos) break;
      if (o != std::string_view::npos && o < c) {
        ++depth;
        cur = o + open.size();
      } else {
        --depth;
        cur = c + close.size();
        if (depth == 0) end = c;
      }
    }
    if (end == std::string_view::npos) {
      if (!first && unterminated) *unterminated = true;
      break;
    }
    ++regions;
    if (!first) first = std::string(text.substr(start + open.size(), end - start - open.size()));
    pos = end + close.size();
  }
  if (region_count) *region_count = regions;
  if (regions > 1) log::info("response has " + std::to_string(regions) + " <" + std::string(tag) + "> regions; using the first");
  return first;
}

std::vector<TransformationAction> parse_steps(std::string_view text) {
  std::vector<TransformationAction> actions;
  size_t pos = 0;
  while (true) {
    size_t start = text.find("<step>", pos);
    if (start == std::string_view::npos) break;
    size_t body = start + 6;
    size_t end = text.find("</step>", body);
    size_t next_open = text.find("<step>", body);
    if (end == std::string_view::npos || (next_open != std::string_view::npos && next_open < end)) {
      log::info("skipping unterminated <step> block");
      pos = next_open == std::string_view::npos ? text.size() : next_open;
      if (next_open == std::string_view::npos) break;
      continue;
    }
    std::string block(text.substr(body, end - body));
    TransformationAction action;
    action.transformation = step_field(block, "Transformation");
    action.change = step_field(block, "Change");
    action.raw = trim(block);
    if (action.transformation.empty() || action.change.empty())
      log::info("skipping <step> without both Transformation and Change");
    else
      actions.push_back(std::move(action));
    pos = end + 7;
  }
  return actions;
}

std::vector<TransformationAction> parse_advice_actions(std::string_view advice) {
  std::vector<std::string> lines;
  {
    std::istringstream in{std::string(advice)};
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  std::vector<BulletLine> parsed;
  size_t top_indent = std::string::npos;
  for (const auto& line : lines) {
    parsed.push_back(classify_line(line));
    if (parsed.back().bullet) top_indent = std::min(top_indent, parsed.back().indent);
  }

  std::vector<TransformationAction> actions;
  if (top_indent != std::string::npos) {
    std::optional<size_t> current;
    std::string head;
    std::vector<std::string> details;
    std::string raw;
    auto flush = [&] {
      if (current && !head.empty()) actions.push_back(make_action(head, details, trim(raw)));
      head.clear();
      details.clear();
      raw.clear();
    };
    for (size_t i = 0; i < parsed.size(); ++i) {
      const auto& l = parsed[i];
      if (l.bullet && l.indent == top_indent) {
        flush();
        current = i;
        head = l.text;
        raw = lines[i] + "\n";
        continue;
      }
      if (!current) continue;  // preamble before the first bullet
      if (l.text.empty()) continue;
      raw += lines[i] + "\n";
      if (!l.bullet && l.indent <= top_indent && details.empty()) head += " " + l.text;  // wrapped head line
      else details.push_back(l.text);
    }
    flush();
    return actions;
  }

  std::string paragraph, raw;
  auto flush = [&] {
    if (!paragraph.empty()) actions.push_back(make_action(paragraph, {}, trim(raw)));
    paragraph.clear();
    raw.clear();
  };
  for (size_t i = 0; i < parsed.size(); ++i) {
    if (parsed[i].text.empty()) {
      flush();
      continue;
    }
    paragraph += (paragraph.empty() ? "" : " ") + parsed[i].text;
    raw += lines[i] + "\n";
  }
  flush();
  return actions;
}

OptimizationStrategy parse_initial_strategy(std::string_view response) {
  if (contains_ir_definition(response))
    throw Error(ErrorKind::MalformedStrategy, "formulation output contains IR function definitions",
                std::string(response));
  bool unterminated = false;
  auto region = extract_tag(response, "code", &unterminated);
  std::string text;
  if (region) {
    text = *region;
  } else {
    log::info(unterminated ? "unterminated <code> region in formulation output; scanning whole response"
                           : "no <code> region in formulation output; scanning whole response");
    text = std::string(response);
  }
  OptimizationStrategy strategy;
  strategy.stage = StrategyStage::Initial;
  strategy.actions = parse_steps(text);
  strategy.raw_text = text;
  if (strategy.actions.empty())
    throw Error(ErrorKind::MalformedStrategy, "no parseable <step> blocks in formulation output", std::string(response));
  return strategy;
}

OptimizationStrategy parse_refined_strategy(std::string_view response) {
  bool unterminated = false;
  auto region = extract_tag(response, "advice", &unterminated);
  if (!region)
    throw Error(ErrorKind::MalformedStrategy,
                unterminated ? "<advice> region is not closed" : "no <advice> region in refinement output",
                std::string(response));
  OptimizationStrategy strategy;
  strategy.stage = StrategyStage::Refined;
  strategy.raw_text = *region;
  strategy.actions = parse_advice_actions(*region);
  if (strategy.actions.empty())
    throw Error(ErrorKind::MalformedStrategy, "<advice> region is empty", std::string(response));
  return strategy;
}

std::string extract_code(std::string_view response) {
  auto region = extract_tag(response, "code");
  if (!region) throw Error(ErrorKind::NoCodeRegion, "response has no <code>...</code> region", std::string(response));
  std::string code = trim(strip_fences(*region));
  if (code.empty()) throw Error(ErrorKind::NoCodeRegion, "<code> region is empty", std::string(response));
  return code + "\n";
}

std::string triple_to_jsonl(const DistilledTriple& triple) {
  nlohmann::ordered_json doc;
  doc["unopt"] = triple.pair.unopt.text;
  doc["opt"] = triple.pair.opt.text;
  doc["strategy"] = nlohmann::ordered_json::parse(strategy_to_json(triple.strategy, -1));
  return doc.dump();
}

// ---- Pipeline --------------------------------------------------------------

Pipeline::Pipeline(StageBackend formulation, StageBackend optimizer, ToolchainConfig toolchain, PipelineOptions options,
                   const prompts::StagePromptSet& prompts)
    : formulation_(std::move(formulation)),
      optimizer_(std::move(optimizer)),
      toolchain_(std::move(toolchain)),
      options_(std::move(options)),
      prompts_(prompts) {
  if (!formulation_.backend || !optimizer_.backend) throw Error(ErrorKind::ConfigError, "pipeline needs two backends");
}

void Pipeline::check_input(const IrProgram& program) const {
  if (options_.token_cap == 0) throw Error(ErrorKind::Precondition, "token cap must be positive");
  if (program.token_count > options_.token_cap)
    throw Error(ErrorKind::OverCap, program.id + ": " + std::to_string(program.token_count) + " tokens exceeds cap " +
                                        std::to_string(options_.token_cap));
  if (options_.validate_input) validate_ir(program, toolchain_);
}

std::string Pipeline::call(const StageBackend& stage, std::string prompt, llm::Purpose purpose) const {
  return stage.backend->complete(llm::make_request(stage.config, std::move(prompt), purpose));
}

IrProgram Pipeline::finish_ir(const IrProgram& source, std::string text) const {
  auto program = IrProgram::from_text(source.id, std::move(text), IrOrigin::LlmGenerated);
  if (options_.validate_output && toolchain_.has(Tool::Opt)) check_ir(program, toolchain_);
  return program;
}

OptimizationStrategy Pipeline::formulate(const IrProgram& program) const {
  check_input(program);
  auto response = call(formulation_, prompts::render_formulation(prompts_, program.text), llm::Purpose::Formulation);
  return parse_initial_strategy(response);
}

OptimizationStrategy Pipeline::refine(const IrProgram& program, const OptimizationStrategy& strategy,
                                      const analysis::AnalysisBundle& bundle) const {
  if (strategy.stage != StrategyStage::Initial)
    throw Error(ErrorKind::Precondition, "refine expects an initial strategy");
  auto prompt = prompts::render_refinement(prompts_, program.text, strategy.raw_text, analysis::render_bundle(bundle));
  return parse_refined_strategy(call(optimizer_, std::move(prompt), llm::Purpose::Refinement));
}

IrProgram Pipeline::realize(const IrProgram& program, const OptimizationStrategy& strategy,
                            const analysis::AnalysisBundle& bundle) const {
  if (strategy.stage != StrategyStage::Refined)
    throw Error(ErrorKind::Precondition, "realize expects a refined strategy");
  auto prompt = prompts::render_realization(prompts_, program.text, strategy.raw_text, analysis::render_bundle(bundle));
  return finish_ir(program, extract_code(call(optimizer_, std::move(prompt), llm::Purpose::Realization)));
}

IrProgram Pipeline::baseline(const IrProgram& program) const {
  check_input(program);
  auto response = call(optimizer_, prompts::render_baseline(prompts_, program.text), llm::Purpose::Realization);
  return finish_ir(program, extract_code(response));
}

DistilledTriple Pipeline::distill(const IrPair& pair) const {
  if (pair.provenance != PairProvenance::CompilerO3)
    throw Error(ErrorKind::Precondition, "distillation needs a compiler -O3 pair");
  enforce_token_cap(pair, options_.token_cap);
  auto response = call(formulation_, prompts::render_distillation(prompts_, pair.unopt.text, pair.opt.text),
                       llm::Purpose::Distillation);
  return {pair, parse_initial_strategy(response)};
}

PipelineRun Pipeline::run(const IrProgram& program, const kb::KnowledgeBase& kb, const retrieval::TfIdfIndex& index,
                          const analysis::AnalysisNameMap& name_map) const {
  PipelineRun out;
  out.initial = formulate(program);
  out.resolution = retrieval::resolve_analysis_set(out.initial, index, kb, options_.retrieval_m);
  out.bundle = analysis::collect_analysis(program, out.resolution.analyses, name_map, toolchain_, options_.collect);
  out.refined = refine(program, out.initial, out.bundle);
  out.optimized = realize(program, out.refined, out.bundle);
  return out;
}

}  // namespace intopt::pipeline
