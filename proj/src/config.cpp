#include "intopt/config.hpp"

#include "intopt/error.hpp"
#include "intopt/process.hpp"

#include <toml.hpp>

#include <cstdlib>

namespace fs = std::filesystem;

namespace intopt {
namespace {

fs::path resolve_against(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

std::optional<fs::path> existing_path(const toml::node_view<const toml::node>& node, const fs::path& base,
                                      const std::string& key) {
  auto value = node.value<std::string>();
  if (!value) {
    if (node) throw Error(ErrorKind::ConfigError, key + " must be a string");
    return std::nullopt;
  }
  auto path = resolve_against(base, *value);
  if (!fs::exists(path)) throw Error(ErrorKind::ConfigError, key + ": missing dependency " + path.string());
  return path;
}

template <typename T>
T get_or(const toml::node_view<const toml::node>& node, T fallback, const std::string& key) {
  if (!node) return fallback;
  auto value = node.value<T>();
  if (!value) throw Error(ErrorKind::ConfigError, key + " has the wrong type");
  return *value;
}

std::vector<std::string> string_list(const toml::node_view<const toml::node>& node, const std::string& key) {
  std::vector<std::string> out;
  if (!node) return out;
  const auto* arr = node.as_array();
  if (!arr) throw Error(ErrorKind::ConfigError, key + " must be an array of strings");
  for (const auto& item : *arr) {
    auto s = item.value<std::string>();
    if (!s) throw Error(ErrorKind::ConfigError, key + " must be an array of strings");
    out.push_back(*s);
  }
  return out;
}

}  // namespace

std::string_view to_string(OptimizeMode mode) { return mode == OptimizeMode::Pipeline ? "pipeline" : "baseline"; }

OptimizeMode optimize_mode_from_string(std::string_view name) {
  if (name == "pipeline") return OptimizeMode::Pipeline;
  if (name == "baseline") return OptimizeMode::Baseline;
  throw Error(ErrorKind::ConfigError, "unknown optimize mode: " + std::string(name));
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, "cannot read config " + path.string() + ": " + e.what());
  }
  return parse(text, fs::absolute(path).parent_path());
}

PipelineConfig PipelineConfig::parse(std::string_view toml_text, const fs::path& base_dir) {
  toml::table doc;
  try {
    doc = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorKind::ConfigError, std::string("invalid TOML: ") + std::string(e.description()));
  }
  const auto& root = std::as_const(doc);
  PipelineConfig cfg;

  auto tc = root["toolchain"];
  cfg.toolchain.opt = existing_path(tc["opt"], base_dir, "toolchain.opt");
  cfg.toolchain.llc = existing_path(tc["llc"], base_dir, "toolchain.llc");
  cfg.toolchain.clangxx = existing_path(tc["clangxx"], base_dir, "toolchain.clangxx");
  cfg.toolchain.alive_tv = existing_path(tc["alive_tv"], base_dir, "toolchain.alive_tv");
  cfg.toolchain.search_path = get_or(tc["search_path"], true, "toolchain.search_path");

  cfg.kb_path = existing_path(root["kb"], base_dir, "kb");
  cfg.analysis_map = existing_path(root["analysis_map"], base_dir, "analysis_map");
  cfg.analysis_map_replace = get_or(root["analysis_map_replace"], false, "analysis_map_replace");
  if (auto t = root["transcripts"].value<std::string>()) cfg.transcripts_dir = resolve_against(base_dir, *t);
  else cfg.transcripts_dir = base_dir / "transcripts";
  if (auto w = root["work_dir"].value<std::string>()) cfg.work_dir = resolve_against(base_dir, *w);
  cfg.workers = static_cast<int>(get_or<int64_t>(root["workers"], 1, "workers"));
  if (cfg.workers < 1) throw Error(ErrorKind::ConfigError, "workers must be at least 1");
  auto cap = get_or<int64_t>(root["token_cap"], 5000, "token_cap");
  if (cap < 1) throw Error(ErrorKind::ConfigError, "token_cap must be positive");
  cfg.token_cap = static_cast<std::size_t>(cap);
  cfg.llm_mode = llm::mode_from_string(get_or<std::string>(root["mode"], "live", "mode"));
  cfg.optimize_mode = optimize_mode_from_string(get_or<std::string>(root["optimize_mode"], "pipeline", "optimize_mode"));

  cfg.retrieval_m = static_cast<int>(get_or<int64_t>(root["retrieval"]["m"], 3, "retrieval.m"));
  if (cfg.retrieval_m < 1) throw Error(ErrorKind::ConfigError, "retrieval.m must be at least 1");
  cfg.analysis_timeout = std::chrono::seconds(get_or<int64_t>(root["analysis"]["timeout_s"], 30, "analysis.timeout_s"));

  auto vf = root["verify"];
  cfg.fuzz_runs = get_or<int64_t>(vf["runs"], 200'000, "verify.runs");
  if (cfg.fuzz_runs < 1) throw Error(ErrorKind::ConfigError, "verify.runs must be at least 1");
  cfg.fuzz_seed = static_cast<unsigned>(get_or<int64_t>(vf["seed"], 1, "verify.seed"));
  cfg.fuzz_budget = std::chrono::seconds(get_or<int64_t>(vf["budget_s"], 600, "verify.budget_s"));
  cfg.alive_timeout = std::chrono::seconds(get_or<int64_t>(vf["alive_timeout_s"], 60, "verify.alive_timeout_s"));
  cfg.alive_flags = string_list(vf["alive_flags"], "verify.alive_flags");
  auto harness = get_or<std::string>(vf["harness_mode"], "template", "verify.harness_mode");
  if (harness == "template") cfg.harness_mode = verify::HarnessMode::Template;
  else if (harness == "llm") cfg.harness_mode = verify::HarnessMode::Llm;
  else throw Error(ErrorKind::ConfigError, "verify.harness_mode must be template or llm");

  auto bn = root["bench"];
  cfg.bench_enabled = get_or(bn["enabled"], true, "bench.enabled");
  cfg.bench_iters = get_or<int64_t>(bn["iters"], 10'000, "bench.iters");
  cfg.bench_warmup = static_cast<int>(get_or<int64_t>(bn["warmup"], 1000, "bench.warmup"));

  if (auto* backends = root["backend"].as_array()) {
    for (const auto& node : *backends) {
      const auto* t = node.as_table();
      if (!t) throw Error(ErrorKind::ConfigError, "[[backend]] entries must be tables");
      toml::node_view<const toml::node> b{t};
      llm::BackendConfig bc;
      bc.id = get_or<std::string>(b["id"], "", "backend.id");
      if (bc.id.empty()) throw Error(ErrorKind::ConfigError, "backend without id");
      bc.kind = llm::backend_kind_from_string(get_or<std::string>(b["kind"], "openai_chat", "backend.kind"));
      bc.endpoint = get_or<std::string>(b["endpoint"], "", "backend.endpoint");
      bc.model = get_or<std::string>(b["model"], "", "backend.model");
      bc.command = string_list(b["command"], "backend.command");
      if (!bc.command.empty() && bc.command[0].find('/') != std::string::npos)
        bc.command[0] = resolve_against(base_dir, bc.command[0]).string();
      bc.sampling.temperature = get_or(b["temperature"], 0.0, "backend.temperature");
      bc.sampling.max_output_tokens =
          static_cast<int>(get_or<int64_t>(b["max_output_tokens"], 4096, "backend.max_output_tokens"));
      bc.max_retries = static_cast<int>(get_or<int64_t>(b["max_retries"], 5, "backend.max_retries"));
      bc.timeout = std::chrono::seconds(get_or<int64_t>(b["timeout_s"], 600, "backend.timeout_s"));
      if ((bc.kind == llm::BackendKind::OpenAiChat || bc.kind == llm::BackendKind::RawCompletion) &&
          bc.endpoint.empty() && cfg.llm_mode != llm::Mode::Replay)
        throw Error(ErrorKind::ConfigError, "backend " + bc.id + " needs an endpoint");
      if (bc.kind == llm::BackendKind::Command && bc.command.empty())
        throw Error(ErrorKind::ConfigError, "backend " + bc.id + " needs a command");
      if (!cfg.backends.emplace(bc.id, bc).second)
        throw Error(ErrorKind::ConfigError, "backend " + bc.id + " defined twice");
    }
  } else if (root["backend"]) {
    throw Error(ErrorKind::ConfigError, "backend must be an array of tables ([[backend]])");
  }

  auto pl = root["pipeline"];
  cfg.formulation_backend = get_or<std::string>(pl["formulation_backend"], "", "pipeline.formulation_backend");
  cfg.optimizer_backend = get_or<std::string>(pl["optimizer_backend"], "", "pipeline.optimizer_backend");
  cfg.harness_backend = get_or<std::string>(pl["harness_backend"], "", "pipeline.harness_backend");
  if (cfg.backends.size() == 1) {
    const auto& only = cfg.backends.begin()->first;
    if (cfg.formulation_backend.empty()) cfg.formulation_backend = only;
    if (cfg.optimizer_backend.empty()) cfg.optimizer_backend = only;
    if (cfg.harness_backend.empty()) cfg.harness_backend = only;
  }
  for (const auto* ref : {&cfg.formulation_backend, &cfg.optimizer_backend, &cfg.harness_backend})
    if (!ref->empty() && !cfg.backends.contains(*ref))
      throw Error(ErrorKind::ConfigError, "backend '" + *ref + "' is referenced but not defined");

  if (cfg.llm_mode == llm::Mode::Replay && !fs::is_directory(cfg.transcripts_dir))
    throw Error(ErrorKind::ConfigError, "replay mode: missing dependency " + cfg.transcripts_dir.string());
  return cfg;
}

std::optional<fs::path> PipelineConfig::locate(const std::optional<fs::path>& cli_path) {
  if (cli_path) return cli_path;
  if (const char* env = std::getenv("INTOPT_CONFIG"); env && *env) return fs::path(env);
  return std::nullopt;
}

const llm::BackendConfig& PipelineConfig::backend(const std::string& id) const {
  if (id.empty()) throw Error(ErrorKind::ConfigError, "no backend selected");
  auto it = backends.find(id);
  if (it == backends.end()) throw Error(ErrorKind::ConfigError, "backend '" + id + "' is not defined");
  return it->second;
}

verify::VerifyConfig PipelineConfig::verify_config() const {
  verify::VerifyConfig vc;
  vc.toolchain = toolchain;
  vc.alive.timeout = alive_timeout;
  vc.alive.flags = alive_flags;
  vc.fuzz.runs = fuzz_runs;
  vc.fuzz.seed = fuzz_seed;
  vc.fuzz.wall_budget = fuzz_budget;
  vc.harness_mode = harness_mode;
  vc.work_root = work_dir;
  return vc;
}

}  // namespace intopt
