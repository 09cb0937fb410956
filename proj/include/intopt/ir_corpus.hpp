#pragma once

#include "intopt/toolchain.hpp"

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace intopt {

enum class IrOrigin { Input, O3Reference, LlmGenerated };
enum class PairProvenance { CompilerO3, LlmPipeline };

std::string_view to_string(IrOrigin origin);
std::string_view to_string(PairProvenance provenance);

// Counts tokens for cap enforcement. The default splits on whitespace and
// emits every punctuation character as its own token; CommandTokenizer is the
// adapter for a model-specific tokenizer.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::string name() const = 0;
};

class WhitespacePunctTokenizer final : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
  std::string name() const override { return "whitespace-punct"; }
};

// Pipes the text to an external command that prints the token count.
class CommandTokenizer final : public Tokenizer {
 public:
  explicit CommandTokenizer(std::vector<std::string> argv) : argv_(std::move(argv)) {}
  std::size_t count(std::string_view text) const override;
  std::string name() const override;

 private:
  std::vector<std::string> argv_;
};

const Tokenizer& default_tokenizer();

enum class Validity { Unchecked, Valid, Invalid };

struct IrProgram {
  std::string id;
  std::string text;
  std::size_t token_count = 0;
  IrOrigin origin = IrOrigin::Input;
  Validity validity = Validity::Unchecked;
  std::string diagnostics;  // verifier stderr when Invalid

  static IrProgram from_text(std::string id, std::string text, IrOrigin origin = IrOrigin::Input,
                             const Tokenizer& tokenizer = default_tokenizer());
};

struct IrPair {
  IrProgram unopt;
  IrProgram opt;
  PairProvenance provenance = PairProvenance::CompilerO3;
};

constexpr std::size_t kDefaultTokenCap = 5000;

// Does not validate syntax. Throws IoError / EmptyInput.
IrProgram load_ir(const std::filesystem::path& path, const Tokenizer& tokenizer = default_tokenizer());

// Runs `opt -passes=verify`; throws InvalidIr (stderr in detail) or ToolMissing.
void validate_ir(const IrProgram& program, const ToolchainConfig& toolchain);

// Like validate_ir but records the verdict on the program instead of throwing
// InvalidIr. ToolMissing still propagates.
void check_ir(IrProgram& program, const ToolchainConfig& toolchain);

// The cap bounds unopt + opt tokens together. Throws OverCap or Precondition.
void enforce_token_cap(const IrPair& pair, std::size_t cap = kDefaultTokenCap);

IrProgram compile_o3_reference(const IrProgram& program, const ToolchainConfig& toolchain,
                               const Tokenizer& tokenizer = default_tokenizer());

// Externally visible function names defined in `text`.
std::set<std::string> public_symbols(std::string_view text);

// True when both sides define the same public function set, where an opt-side
// name `f_opt` also matches base name `f`.
bool public_symbols_match(const IrPair& pair);

}  // namespace intopt
