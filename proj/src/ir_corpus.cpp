#include "intopt/ir_corpus.hpp"

#include "intopt/error.hpp"
#include "intopt/ir_text.hpp"
#include "intopt/process.hpp"

#include <cctype>
#include <charconv>

namespace fs = std::filesystem;

namespace intopt {

std::string_view to_string(IrOrigin origin) {
  switch (origin) {
    case IrOrigin::Input: return "input";
    case IrOrigin::O3Reference: return "o3_reference";
    case IrOrigin::LlmGenerated: return "llm_generated";
  }
  return "input";
}

std::string_view to_string(PairProvenance provenance) {
  return provenance == PairProvenance::CompilerO3 ? "compiler_o3" : "llm_pipeline";
}

std::size_t WhitespacePunctTokenizer::count(std::string_view text) const {
  std::size_t tokens = 0;
  bool in_word = false;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '_') {
      if (!in_word) ++tokens;
      in_word = true;
    } else {
      in_word = false;
      if (!std::isspace(c)) ++tokens;
    }
  }
  return tokens;
}

std::size_t CommandTokenizer::count(std::string_view text) const {
  auto result = run_process(argv_, {.stdin_text = std::string(text)});
  if (!result.ok()) throw Error(ErrorKind::ToolFailure, "tokenizer command failed: " + name(), result.err);
  std::size_t value = 0;
  std::string_view out = result.out;
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(out.data(), out.data() + out.size(), value);
  if (ec != std::errc{} || ptr != out.data() + out.size())
    throw Error(ErrorKind::ToolFailure, "tokenizer printed a non-integer: " + std::string(out));
  return value;
}

std::string CommandTokenizer::name() const {
  std::string joined = "command:";
  for (const auto& a : argv_) joined += (joined.size() > 8 ? " " : "") + a;
  return joined;
}

const Tokenizer& default_tokenizer() {
  static const WhitespacePunctTokenizer tokenizer;
  return tokenizer;
}

IrProgram IrProgram::from_text(std::string id, std::string text, IrOrigin origin, const Tokenizer& tokenizer) {
  IrProgram p;
  p.id = std::move(id);
  p.token_count = tokenizer.count(text);
  p.text = std::move(text);
  p.origin = origin;
  return p;
}

IrProgram load_ir(const fs::path& path, const Tokenizer& tokenizer) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorKind::IoError, "not a readable file: " + path.string());
  std::string text = read_file(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    throw Error(ErrorKind::EmptyInput, "empty IR file: " + path.string());
  return IrProgram::from_text(path.stem().string(), std::move(text), IrOrigin::Input, tokenizer);
}

namespace {

ProcessResult run_opt_on(const IrProgram& program, const ToolchainConfig& toolchain,
                         const std::vector<std::string>& args) {
  auto opt = toolchain.resolve(Tool::Opt);
  TempDir dir("intopt-ir");
  auto input = dir.path() / "input.ll";
  write_file(input, program.text);
  std::vector<std::string> argv{opt.string()};
  argv.insert(argv.end(), args.begin(), args.end());
  argv.push_back(input.string());
  return run_process(argv);
}

}  // namespace

void validate_ir(const IrProgram& program, const ToolchainConfig& toolchain) {
  auto result = run_opt_on(program, toolchain, {"-passes=verify", "-disable-output"});
  if (!result.ok()) throw Error(ErrorKind::InvalidIr, "verifier rejected " + program.id, result.err);
}

void check_ir(IrProgram& program, const ToolchainConfig& toolchain) {
  try {
    validate_ir(program, toolchain);
    program.validity = Validity::Valid;
    program.diagnostics.clear();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InvalidIr) throw;
    program.validity = Validity::Invalid;
    program.diagnostics = e.detail();
  }
}

void enforce_token_cap(const IrPair& pair, std::size_t cap) {
  if (cap == 0) throw Error(ErrorKind::Precondition, "token cap must be positive");
  std::size_t total = pair.unopt.token_count + pair.opt.token_count;
  if (total > cap)
    throw Error(ErrorKind::OverCap, "pair " + pair.unopt.id + " has " + std::to_string(total) +
                                        " tokens, cap is " + std::to_string(cap));
}

IrProgram compile_o3_reference(const IrProgram& program, const ToolchainConfig& toolchain,
                               const Tokenizer& tokenizer) {
  auto result = run_opt_on(program, toolchain, {"-O3", "-S", "-o", "-"});
  if (!result.ok()) throw Error(ErrorKind::ToolFailure, "opt -O3 failed on " + program.id, result.err);
  auto out = IrProgram::from_text(program.id, std::move(result.out), IrOrigin::O3Reference, tokenizer);
  out.validity = Validity::Valid;
  return out;
}

std::set<std::string> public_symbols(std::string_view text) { return ir::scan_module(text).public_functions(); }

bool public_symbols_match(const IrPair& pair) {
  auto base = public_symbols(pair.unopt.text);
  auto opt = public_symbols(pair.opt.text);
  std::set<std::string> normalized;
  for (const auto& name : opt) {
    if (!base.contains(name) && name.ends_with("_opt") && base.contains(name.substr(0, name.size() - 4)))
      normalized.insert(name.substr(0, name.size() - 4));
    else
      normalized.insert(name);
  }
  return base == normalized;
}

}  // namespace intopt
