#include "intopt/verification.hpp"

#include "intopt/embedded_harness.hpp"
#include "intopt/error.hpp"
#include "intopt/ir_text.hpp"
#include "intopt/log.hpp"
#include "intopt/pipeline.hpp"
#include "intopt/process.hpp"
#include "intopt/prompts.hpp"

#include <json.hpp>

#include <map>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace intopt::verify {
namespace {

constexpr std::string_view kCrashMarker = "Test unit written to ";

bool is_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::string tail(const std::string& text, size_t limit = 8192) {
  if (text.size() <= limit) return text;
  return "...\n" + text.substr(text.size() - limit);
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  for (size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size()))
    text.replace(pos, from.size(), to);
}

bool allowed_external(std::string_view name) {
  static const std::set<std::string_view> libm = {
      "sin",   "cos",   "tan",      "asin",  "acos",  "atan",      "atan2",  "sinh",  "cosh",   "tanh",
      "exp",   "exp2",  "expm1",    "log",   "log2",  "log10",     "log1p",  "pow",   "sqrt",   "cbrt",
      "fabs",  "floor", "ceil",     "round", "trunc", "rint",      "nearbyint", "fmod", "fmin", "fmax",
      "fma",   "hypot", "copysign", "ldexp", "lround", "llround",  "lrint",  "llrint", "remainder",
  };
  static const std::set<std::string_view> libc = {"abs", "labs", "llabs", "memcpy", "memmove", "memset", "memcmp"};
  if (name.starts_with("llvm.")) return true;
  if (libc.contains(name) || libm.contains(name)) return true;
  if ((name.ends_with("f") || name.ends_with("l")) && libm.contains(name.substr(0, name.size() - 1))) return true;
  return false;
}

struct ScalarType {
  std::string cpp;  // C++ spelling in declarations
  size_t bytes = 0;
  enum Kind { Int, Bool, Float, Void } kind = Int;
};

std::optional<ScalarType> scalar_type(const std::string& ir_type) {
  if (ir_type == "i1") return ScalarType{"uint8_t", 1, ScalarType::Bool};
  if (ir_type == "i8") return ScalarType{"int8_t", 1, ScalarType::Int};
  if (ir_type == "i16") return ScalarType{"int16_t", 2, ScalarType::Int};
  if (ir_type == "i32") return ScalarType{"int32_t", 4, ScalarType::Int};
  if (ir_type == "i64") return ScalarType{"int64_t", 8, ScalarType::Int};
  if (ir_type == "float") return ScalarType{"float", 4, ScalarType::Float};
  if (ir_type == "double") return ScalarType{"double", 8, ScalarType::Float};
  if (ir_type == "void") return ScalarType{"void", 0, ScalarType::Void};
  return std::nullopt;
}

bool is_cpp_identifier(std::string_view name) {
  if (name.empty() || std::isdigit(static_cast<unsigned char>(name[0]))) return false;
  return std::all_of(name.begin(), name.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

std::string asm_label(std::string_view symbol) {
  std::string out;
  for (char c : symbol) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string sanitize_component(std::string_view id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
  if (out.empty() || out == "." || out == "..") out = "pair";
  return out;
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> lines;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

std::string trim_copy(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Alive2: return "alive2";
    case Method::DiffTest: return "diff_test";
    case Method::None: return "none";
  }
  return "none";
}

std::string_view to_string(Status status) {
  switch (status) {
    case Status::Equivalent: return "equivalent";
    case Status::Inequivalent: return "inequivalent";
    case Status::Alive2Timeout: return "alive2_timeout";
    case Status::Alive2Unsupported: return "alive2_unsupported";
    case Status::FuzzCrash: return "fuzz_crash";
    case Status::BuildFailure: return "build_failure";
    case Status::Skipped: return "skipped";
  }
  return "skipped";
}

Method method_from_string(std::string_view name) {
  for (auto m : {Method::Alive2, Method::DiffTest, Method::None})
    if (to_string(m) == name) return m;
  throw Error(ErrorKind::ParseError, "unknown verification method: " + std::string(name));
}

Status status_from_string(std::string_view name) {
  for (auto s : {Status::Equivalent, Status::Inequivalent, Status::Alive2Timeout, Status::Alive2Unsupported,
                 Status::FuzzCrash, Status::BuildFailure, Status::Skipped})
    if (to_string(s) == name) return s;
  throw Error(ErrorKind::ParseError, "unknown verification status: " + std::string(name));
}

std::string verdict_to_json(const VerificationVerdict& verdict, int indent) {
  nlohmann::ordered_json doc;
  doc["method"] = to_string(verdict.method);
  doc["status"] = to_string(verdict.status);
  doc["reason"] = verdict.reason;
  doc["fuzz_runs_completed"] = verdict.fuzz_runs_completed;
  doc["reproducer"] = verdict.reproducer;
  doc["detail"] = verdict.detail;
  return doc.dump(indent);
}

VerificationVerdict verdict_from_json(std::string_view json_text) {
  try {
    auto doc = nlohmann::json::parse(json_text);
    VerificationVerdict v;
    v.method = method_from_string(doc.at("method").get<std::string>());
    v.status = status_from_string(doc.at("status").get<std::string>());
    v.reason = doc.value("reason", std::string());
    v.fuzz_runs_completed = doc.value("fuzz_runs_completed", 0LL);
    v.reproducer = doc.value("reproducer", std::string());
    v.detail = doc.value("detail", std::string());
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed verdict: ") + e.what());
  }
}

// ---- Alive2 ---------------------------------------------------------------

VerificationVerdict parse_alive_output(const std::string& output, int exit_code) {
  auto summary_count = [&](const char* label) -> long {
    std::regex re(std::string(R"((\d+) )") + label);
    std::smatch m;
    return std::regex_search(output, m, re) ? std::stol(m[1].str()) : -1;
  };
  long correct = summary_count("correct transformations");
  long incorrect = summary_count("incorrect transformations");
  long unproved = summary_count("failed-to-prove transformations");
  long errors = summary_count("Alive2 errors");

  VerificationVerdict v;
  v.method = Method::Alive2;
  v.detail = tail(output);
  if (incorrect > 0 || output.find("Transformation doesn't verify!") != std::string::npos) {
    v.status = Status::Inequivalent;
  } else if (output.find("Timeout") != std::string::npos || output.find("timeout") != std::string::npos) {
    v.status = Status::Alive2Timeout;
  } else if (unproved > 0 || errors > 0 || output.find("Unsupported") != std::string::npos ||
             output.find("unsupported") != std::string::npos) {
    v.status = Status::Alive2Unsupported;
  } else if (correct > 0 || output.find("Transformation seems to be correct!") != std::string::npos) {
    v.status = Status::Equivalent;
  } else if (exit_code != 0) {
    throw Error(ErrorKind::ToolFailure, "alive-tv exited with " + std::to_string(exit_code) + " and no verdict", output);
  } else {
    v.status = Status::Alive2Unsupported;
    v.reason = "no_functions_compared";
  }
  return v;
}

VerificationVerdict alive_check(const IrPair& pair, const ToolchainConfig& toolchain, const AliveOptions& options) {
  auto alive = toolchain.find(Tool::AliveTv);
  if (!alive) return {Method::None, Status::Skipped, "alive-tv not found", "tool_missing:alive-tv", 0, {}};
  TempDir dir("intopt-alive");
  write_file(dir.path() / "src.ll", pair.unopt.text);
  write_file(dir.path() / "tgt.ll", pair.opt.text);
  std::vector<std::string> argv = {alive->string()};
  argv.insert(argv.end(), options.flags.begin(), options.flags.end());
  argv.push_back((dir.path() / "src.ll").string());
  argv.push_back((dir.path() / "tgt.ll").string());
  auto result = run_process(argv, {.timeout = std::chrono::duration_cast<std::chrono::milliseconds>(options.timeout)});
  std::string flags_note = "alive-tv flags:";
  for (const auto& f : options.flags) flags_note += " " + f;
  if (result.timed_out)
    return {Method::Alive2, Status::Alive2Timeout,
            flags_note + "\ntimed out after " + std::to_string(options.timeout.count()) + " s", {}, 0, {}};
  if (result.term_signal != 0)
    throw Error(ErrorKind::ToolFailure, "alive-tv killed by signal " + std::to_string(result.term_signal), result.err);
  auto verdict = parse_alive_output(result.out + result.err, result.exit_code);
  verdict.detail = flags_note + "\n" + verdict.detail;
  return verdict;
}

// ---- differential testing -------------------------------------------------

std::optional<std::string> diff_test_ineligibility(const IrPair& pair) {
  for (const auto* side : {&pair.unopt, &pair.opt}) {
    auto symbols = ir::scan_module(side->text);
    std::set<std::string> defined;
    for (const auto& f : symbols.functions)
      if (f.is_definition) defined.insert(f.name);
    for (const auto& f : symbols.functions)
      if (!f.is_definition && !defined.contains(f.name) && !allowed_external(f.name))
        return "external_function:" + f.name;
    for (const auto& g : symbols.globals)
      if (g.is_external_declaration) return "external_global:" + g.name;
  }
  return std::nullopt;
}

IrProgram merge_for_diff(const IrPair& pair) {
  if (!public_symbols_match(pair)) {
    std::string base, opt;
    for (const auto& s : public_symbols(pair.unopt.text)) base += " " + s;
    for (const auto& s : public_symbols(pair.opt.text)) opt += " " + s;
    throw Error(ErrorKind::SymbolClash, "public symbols differ: unopt {" + base + " } vs opt {" + opt + " }");
  }
  const auto base = ir::scan_module(pair.unopt.text);
  const auto opt = ir::scan_module(pair.opt.text);

  std::set<std::string> taken;
  std::set<std::string> base_defined_functions;
  for (const auto& f : base.functions) {
    taken.insert(f.name);
    if (f.is_definition) base_defined_functions.insert(f.name);
  }
  for (const auto& g : base.globals) taken.insert(g.name);

  long max_md = -1, max_attr = -1;
  std::set<std::string> base_comdats;
  std::map<std::string, std::string> base_types;
  ir::rewrite_identifiers(pair.unopt.text, [&](ir::SigilKind kind, std::string_view name) -> std::optional<std::string> {
    if (kind == ir::SigilKind::Metadata && is_digits(name)) max_md = std::max(max_md, std::stol(std::string(name)));
    if (kind == ir::SigilKind::AttrGroup && is_digits(name)) max_attr = std::max(max_attr, std::stol(std::string(name)));
    if (kind == ir::SigilKind::Comdat) base_comdats.insert(std::string(name));
    return std::nullopt;
  });
  static const std::regex type_def(R"(^(%[^ ]+)\s*=\s*type\s)");
  for (const auto& line : lines_of(pair.unopt.text)) {
    std::smatch m;
    if (std::regex_search(line, m, type_def)) base_types[m[1].str()] = trim_copy(line);
  }

  std::map<std::string, std::string> renames;
  auto assign = [&](const std::string& name, bool local) {
    std::string target = name + "_opt";
    if (!local && name.ends_with("_opt") && base_defined_functions.contains(name.substr(0, name.size() - 4)))
      target = name;  // already carries the suffix
    for (int n = 1; taken.contains(target); ++n) {
      if (!local) throw Error(ErrorKind::SymbolClash, "cannot rename @" + name + ": @" + target + " already exists");
      target = name + "_opt." + std::to_string(n);
    }
    renames[name] = target;
    taken.insert(target);
  };
  for (const auto& f : opt.functions)
    if (f.is_definition) assign(f.name, ir::is_local_linkage(f.linkage));
  for (const auto& g : opt.globals)
    if (!g.is_external_declaration) assign(g.name, ir::is_local_linkage(g.linkage));

  // Opt-side declarations of names the base module already provides are dropped.
  std::set<std::string> drop_declares;
  for (const auto& f : opt.functions)
    if (!f.is_definition && taken.contains(f.name) && !renames.contains(f.name)) drop_declares.insert(f.name);
  for (const auto& g : opt.globals)
    if (g.is_external_declaration && taken.contains(g.name) && !renames.contains(g.name)) drop_declares.insert(g.name);

  static const std::regex named_md(R"(^![A-Za-z._$\-][^ ]*\s*=)");
  static const std::regex declare_name(R"(^declare\b.*?@("(?:[^"\\]|\\.)*"|[-a-zA-Z$._0-9]+)\s*\()");
  static const std::regex external_global(R"(^@("(?:[^"\\]|\\.)*"|[-a-zA-Z$._0-9]+)\s*=.*\bexternal\b)");
  auto unquote = [](std::string s) {
    if (s.size() >= 2 && s.front() == '"') s = s.substr(1, s.size() - 2);
    return s;
  };

  std::string kept;
  bool in_function = false;
  for (const auto& line : lines_of(pair.opt.text)) {
    if (in_function) {
      kept += line + "\n";
      if (line == "}") in_function = false;
      continue;
    }
    if (line.starts_with("define")) {
      in_function = line.find('{') != std::string::npos && trim_copy(line) != "}";
      kept += line + "\n";
      continue;
    }
    if (line.starts_with("; ModuleID") || line.starts_with("source_filename") || line.starts_with("target datalayout") ||
        line.starts_with("target triple"))
      continue;
    std::smatch m;
    if (std::regex_search(line, m, named_md)) continue;
    if (std::regex_search(line, m, declare_name) && drop_declares.contains(unquote(m[1].str()))) continue;
    if (std::regex_search(line, m, external_global) && drop_declares.contains(unquote(m[1].str()))) continue;
    if (std::regex_search(line, m, type_def)) {
      auto it = base_types.find(m[1].str());
      if (it != base_types.end()) {
        if (it->second == trim_copy(line)) continue;
        throw Error(ErrorKind::SymbolClash, "named type " + m[1].str() + " differs between unopt and opt");
      }
    }
    kept += line + "\n";
  }

  std::map<std::string, std::string> comdat_renames;
  auto rewritten = ir::rewrite_identifiers(kept, [&](ir::SigilKind kind, std::string_view name) -> std::optional<std::string> {
    switch (kind) {
      case ir::SigilKind::Global: {
        auto it = renames.find(std::string(name));
        if (it != renames.end()) return it->second;
        return std::nullopt;
      }
      case ir::SigilKind::Metadata:
        if (is_digits(name)) return std::to_string(std::stol(std::string(name)) + max_md + 1);
        return std::nullopt;
      case ir::SigilKind::AttrGroup:
        if (is_digits(name)) return std::to_string(std::stol(std::string(name)) + max_attr + 1);
        return std::nullopt;
      case ir::SigilKind::Comdat: {
        // Comdats follow their function's rename so implicit `comdat` stays consistent.
        auto key = std::string(name);
        auto it = comdat_renames.find(key);
        if (it != comdat_renames.end()) return it->second;
        std::string target = renames.contains(key) ? renames[key] : key + "_opt";
        for (int n = 1; base_comdats.contains(target); ++n) target = key + "_opt." + std::to_string(n);
        comdat_renames[key] = target;
        return target;
      }
      case ir::SigilKind::Local: return std::nullopt;
    }
    return std::nullopt;
  });

  std::string merged = pair.unopt.text;
  if (!merged.empty() && merged.back() != '\n') merged += '\n';
  merged += "\n; ---- optimized version ----\n";
  merged += rewritten;
  return IrProgram::from_text(pair.unopt.id, std::move(merged), IrOrigin::LlmGenerated);
}

std::vector<std::pair<std::string, std::string>> function_pairs(std::string_view merged_text) {
  auto symbols = ir::scan_module(merged_text);
  auto defined = symbols.public_functions();
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& name : defined)
    if (!name.ends_with("_opt") && defined.contains(name + "_opt")) pairs.emplace_back(name, name + "_opt");
  return pairs;
}

FuzzHarness template_harness(const IrProgram& merged) {
  auto symbols = ir::scan_module(merged.text);
  auto pairs = function_pairs(merged.text);
  if (pairs.empty()) throw Error(ErrorKind::Precondition, "merged module has no (f, f_opt) function pairs");

  std::string helpers, declarations, body;
  bool need_float_helper = false;
  size_t min_size = 0;
  int fn_index = 0;
  for (size_t k = 0; k < pairs.size(); ++k) {
    const auto& [base_name, opt_name] = pairs[k];
    const auto* fn = symbols.function(base_name);
    const auto* fn_opt = symbols.function(opt_name);
    if (fn->varargs) throw Error(ErrorKind::UnsupportedSignature, base_name + " is variadic");
    if (fn->param_types != fn_opt->param_types || fn->return_type != fn_opt->return_type)
      throw Error(ErrorKind::UnsupportedSignature, base_name + " and " + opt_name + " have different signatures");
    auto ret = scalar_type(fn->return_type);
    if (!ret) throw Error(ErrorKind::UnsupportedSignature, base_name + " returns " + fn->return_type);
    std::vector<ScalarType> params;
    for (const auto& p : fn->param_types) {
      auto t = scalar_type(p);
      if (!t || t->kind == ScalarType::Void)
        throw Error(ErrorKind::UnsupportedSignature, base_name + " has a " + p + " parameter");
      params.push_back(*t);
    }

    std::string param_list;
    for (size_t i = 0; i < params.size(); ++i) param_list += (i ? ", " : "") + params[i].cpp;
    auto cpp_name = [&](const std::string& symbol) {
      return is_cpp_identifier(symbol) ? symbol : "fuzz_fn_" + std::to_string(fn_index++);
    };
    std::string base_cpp = cpp_name(base_name), opt_cpp = cpp_name(opt_name);
    declarations += ret->cpp + " " + base_cpp + "(" + param_list + ") asm(\"" + asm_label(base_name) + "\");\n";
    declarations += ret->cpp + " " + opt_cpp + "(" + param_list + ") asm(\"" + asm_label(opt_name) + "\");\n";

    const std::string sfx = k == 0 ? "" : "_" + std::to_string(k);
    size_t offset = 0;
    std::string args;
    body += "\n";
    for (size_t i = 0; i < params.size(); ++i) {
      std::string var = "in" + std::to_string(i) + sfx;
      body += "    " + params[i].cpp + " " + var + ";\n";
      body += "    std::memcpy(&" + var + ", data + " + std::to_string(offset) + ", " + std::to_string(params[i].bytes) +
              ");\n";
      if (params[i].kind == ScalarType::Bool) body += "    " + var + " &= 1;\n";
      offset += params[i].bytes;
      args += (i ? ", " : "") + var;
    }
    min_size = std::max(min_size, offset);
    if (!params.empty()) body += "\n";
    if (ret->kind == ScalarType::Void) {
      body += "    " + base_cpp + "(" + args + ");\n";
      body += "    " + opt_cpp + "(" + args + ");\n";
      continue;
    }
    std::string rb = "r_base" + sfx, ro = "r_opt" + sfx;
    body += "    " + ret->cpp + " " + rb + " = " + base_cpp + "(" + args + ");\n";
    body += "    " + ret->cpp + " " + ro + "  = " + opt_cpp + "(" + args + ");\n\n";
    std::string mismatch;
    switch (ret->kind) {
      case ScalarType::Bool: mismatch = "(" + rb + " & 1) != (" + ro + " & 1)"; break;
      case ScalarType::Float:
        need_float_helper = true;
        mismatch = "!same_value(" + rb + ", " + ro + ")";
        break;
      default: mismatch = rb + " != " + ro; break;
    }
    body += "    if (" + mismatch + ") {\n        __builtin_trap();\n    }\n";
  }
  if (need_float_helper)
    helpers =
        "// Bitwise equality, except that any two NaNs match.\n"
        "template <typename T>\n"
        "static bool same_value(T a, T b) {\n"
        "    if (a != a && b != b) return true;\n"
        "    return std::memcmp(&a, &b, sizeof(T)) == 0;\n"
        "}\n\n";

  std::string source(embedded::fuzz_scalar);
  replace_all(source, "@HELPERS@", helpers);
  replace_all(source, "@DECLARATIONS@", declarations);
  replace_all(source, "@MIN_SIZE@", std::to_string(min_size));
  replace_all(source, "@BODY@", body);
  return {source, pairs, HarnessProvenance::Template};
}

std::string extract_harness_source(std::string_view response) {
  std::string source;
  size_t fence = response.find("```");
  if (fence != std::string_view::npos) {
    size_t start = response.find('\n', fence);
    size_t end = start == std::string_view::npos ? std::string_view::npos : response.find("```", start);
    if (end != std::string_view::npos) source = std::string(response.substr(start + 1, end - start - 1));
  }
  if (source.empty()) {
    if (auto region = pipeline::extract_tag(response, "code")) source = *region;
    else source = std::string(response);
  }
  size_t first = source.find("LLVMFuzzerTestOneInput");
  if (first == std::string::npos)
    throw Error(ErrorKind::NoCodeRegion, "harness response has no LLVMFuzzerTestOneInput", std::string(response));
  static const std::regex definition(R"(LLVMFuzzerTestOneInput\s*\([^)]*\)\s*\{)");
  auto count = std::distance(std::sregex_iterator(source.begin(), source.end(), definition), std::sregex_iterator());
  if (count != 1)
    throw Error(ErrorKind::NoCodeRegion,
                "harness must define exactly one fuzzer entry point, found " + std::to_string(count), source);
  return source;
}

FuzzHarness llm_harness(const IrProgram& merged, llm::Backend& backend, const llm::BackendConfig& config) {
  auto pairs = function_pairs(merged.text);
  if (pairs.empty()) throw Error(ErrorKind::Precondition, "merged module has no (f, f_opt) function pairs");
  auto prompt = prompts::render_harness(prompts::StagePromptSet::defaults(), merged.text);
  auto response = backend.complete(llm::make_request(config, std::move(prompt), llm::Purpose::HarnessGeneration));
  return {extract_harness_source(response), pairs, HarnessProvenance::LlmGenerated};
}

fs::path compile_ir(const fs::path& ll_path, const ToolchainConfig& toolchain, const fs::path& out_dir,
                    const BuildOptions& options, std::string* log) {
  auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(options.timeout);
  std::vector<std::string> argv;
  fs::path out;
  if (auto llc = toolchain.find(Tool::Llc)) {
    out = out_dir / (ll_path.stem().string() + ".s");
    argv = {llc->string()};
    argv.insert(argv.end(), options.llc_flags.begin(), options.llc_flags.end());
    argv.insert(argv.end(), {ll_path.string(), "-o", out.string()});
  } else if (options.allow_clang_codegen) {
    auto clang = toolchain.resolve(Tool::ClangXX);
    out = out_dir / (ll_path.stem().string() + ".o");
    argv = {clang.string(), "-x", "ir", "-c", "-O2", "-Xclang", "-disable-llvm-passes", "-Wno-override-module",
            ll_path.string(), "-o", out.string()};
    if (log) *log += "llc not found; code generation through clang with IR passes disabled\n";
  } else {
    toolchain.resolve(Tool::Llc);
  }
  auto result = run_process(argv, {.timeout = timeout});
  if (!result.ok())
    throw Error(ErrorKind::BuildFailure, "code generation failed for " + ll_path.filename().string(),
                result.out + result.err);
  return out;
}

fs::path build_fuzzer(const IrProgram& merged, const FuzzHarness& harness, const ToolchainConfig& toolchain,
                      const fs::path& workdir, const BuildOptions& options) {
  fs::create_directories(workdir);
  auto ll = workdir / "merged.ll";
  auto cc = workdir / "fuzz.cc";
  write_file(ll, merged.text);
  write_file(cc, harness.source);
  std::string build_log;
  auto object = compile_ir(ll, toolchain, workdir, options, &build_log);
  auto clang = toolchain.resolve(Tool::ClangXX);
  auto binary = workdir / "fuzzer";
  std::vector<std::string> argv = {clang.string(), "-O1", "-g"};
  argv.insert(argv.end(), options.link_flags.begin(), options.link_flags.end());
  argv.insert(argv.end(), {cc.string(), object.string(), "-o", binary.string()});
  auto result = run_process(argv, {.timeout = std::chrono::duration_cast<std::chrono::milliseconds>(options.timeout)});
  if (!result.ok()) throw Error(ErrorKind::BuildFailure, "linking the fuzzer failed", build_log + result.out + result.err);
  return binary;
}

VerificationVerdict run_diff_fuzz(const fs::path& binary, const fs::path& corpus_dir, const FuzzOptions& options) {
  if (options.runs < 1) throw Error(ErrorKind::Precondition, "fuzz runs must be at least 1");
  if (!fs::exists(binary)) throw Error(ErrorKind::RunFailure, "fuzzer binary not found: " + binary.string());
  fs::create_directories(corpus_dir);
  auto artifact_prefix = fs::absolute(binary).parent_path().string() + "/";
  std::vector<std::string> argv = {fs::absolute(binary).string(),
                                   "-runs=" + std::to_string(options.runs),
                                   "-seed=" + std::to_string(options.seed),
                                   "-timeout=" + std::to_string(options.per_input_timeout_s),
                                   "-artifact_prefix=" + artifact_prefix,
                                   fs::absolute(corpus_dir).string()};
  auto result = run_process(argv, {.timeout = std::chrono::duration_cast<std::chrono::milliseconds>(options.wall_budget)});
  std::string output = result.err + result.out;

  VerificationVerdict v;
  v.method = Method::DiffTest;
  v.detail = tail(output);
  static const std::regex done(R"(Done (\d+) runs)");
  std::smatch m;
  if (std::regex_search(output, m, done)) v.fuzz_runs_completed = std::stoll(m[1].str());

  if (result.timed_out) {
    v.status = Status::Skipped;
    v.reason = "fuzz_budget_exceeded";
    v.detail = "wall-clock budget of " + std::to_string(options.wall_budget.count()) + " s exceeded\n" + v.detail;
    return v;
  }
  if (auto pos = output.find(kCrashMarker); pos != std::string::npos) {
    auto end = output.find_first_of(" \n", pos + kCrashMarker.size());
    v.reproducer = output.substr(pos + kCrashMarker.size(), end - pos - kCrashMarker.size());
  }
  if (!result.ok()) {
    v.status = Status::FuzzCrash;
    return v;
  }
  if (v.fuzz_runs_completed >= options.runs) {
    v.status = Status::Equivalent;
  } else {
    v.status = Status::Skipped;
    v.reason = "incomplete_runs";
  }
  return v;
}

bool replay_reproducer(const fs::path& binary, const fs::path& input) {
  auto result = run_process({fs::absolute(binary).string(), fs::absolute(input).string()},
                            {.timeout = std::chrono::milliseconds(60'000)});
  return !result.ok();
}

fs::path workspace_for(const IrPair& pair, const VerifyConfig& config) {
  return config.work_root / sanitize_component(pair.unopt.id);
}

VerificationVerdict verify(const IrPair& pair, const VerifyConfig& config) {
  if (pair.opt.validity == Validity::Invalid)
    return {Method::None, Status::BuildFailure, pair.opt.diagnostics, "invalid_ir", 0, {}};

  std::string alive_note;
  if (config.use_alive) {
    try {
      auto verdict = alive_check(pair, config.toolchain, config.alive);
      if (verdict.status == Status::Equivalent || verdict.status == Status::Inequivalent) return verdict;
      alive_note = "alive2: " + std::string(to_string(verdict.status)) +
                   (verdict.reason.empty() ? "" : " (" + verdict.reason + ")") + "\n";
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ToolFailure) throw;
      log::warning(std::string(e.what()) + "; falling back to differential testing");
      alive_note = "alive2: tool failure\n";
    }
  }

  auto fail = [&](Status status, std::string reason, std::string detail, Method method = Method::DiffTest) {
    return VerificationVerdict{method, status, alive_note + detail, std::move(reason), 0, {}};
  };

  if (auto reason = diff_test_ineligibility(pair)) return fail(Status::Skipped, *reason, "", Method::None);

  auto workdir = workspace_for(pair, config);
  std::error_code ec;
  fs::remove_all(workdir, ec);
  try {
    auto merged = merge_for_diff(pair);
    FuzzHarness harness;
    if (config.harness_mode == HarnessMode::Llm) {
      if (!config.harness_backend) throw Error(ErrorKind::ConfigError, "LLM harness mode needs a backend");
      harness = llm_harness(merged, *config.harness_backend, config.harness_backend_config);
    } else {
      harness = template_harness(merged);
    }
    auto binary = build_fuzzer(merged, harness, config.toolchain, workdir, config.build);
    auto verdict = run_diff_fuzz(binary, workdir / "corpus", config.fuzz);
    verdict.detail = alive_note + verdict.detail;
    return verdict;
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::BuildFailure: return fail(Status::BuildFailure, "build_failure", tail(e.what() + ("\n" + e.detail())));
      case ErrorKind::SymbolClash: return fail(Status::Skipped, "symbol_clash", e.what(), Method::None);
      case ErrorKind::UnsupportedSignature:
        return fail(Status::Skipped, "unsupported_signature", e.what(), Method::None);
      case ErrorKind::NoCodeRegion: return fail(Status::Skipped, "harness_unusable", e.what(), Method::None);
      case ErrorKind::ToolMissing: return fail(Status::Skipped, "tool_missing", e.what(), Method::None);
      case ErrorKind::Precondition: return fail(Status::Skipped, "no_function_pairs", e.what(), Method::None);
      default: throw;
    }
  }
}

}  // namespace intopt::verify
