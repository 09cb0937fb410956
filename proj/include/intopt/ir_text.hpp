#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

// Lightweight lexical view of textual LLVM IR. Nothing here builds an AST;
// the toolkit treats IR as opaque text plus a symbol table recovered by
// scanning.
namespace intopt::ir {

enum class SigilKind { Global, Local, Metadata, AttrGroup, Comdat };

// Calls `rename(kind, name)` for every sigil identifier outside string
// literals and comments; a returned value replaces the identifier (without
// sigil and unquoted; quoting is reapplied as needed).
std::string rewrite_identifiers(
    std::string_view text,
    const std::function<std::optional<std::string>(SigilKind, std::string_view)>& rename);

// Renders `@name` / `%name`, quoting when the name is not a bare identifier.
std::string format_identifier(char sigil, std::string_view name);

enum class Linkage {
  External,
  Private,
  Internal,
  Weak,
  WeakOdr,
  Linkonce,
  LinkonceOdr,
  Common,
  Appending,
  ExternWeak,
  AvailableExternally,
};

struct FunctionSymbol {
  std::string name;
  Linkage linkage = Linkage::External;
  bool is_definition = false;
  std::string return_type;
  std::vector<std::string> param_types;
  bool varargs = false;
  // Character range of the header line(s) up to and including `{` for
  // definitions, or the full `declare` line.
  size_t begin = 0;
  size_t end = 0;
};

struct GlobalSymbol {
  std::string name;
  Linkage linkage = Linkage::External;
  bool is_external_declaration = false;  // `@g = external global ...`
};

struct ModuleSymbols {
  std::vector<FunctionSymbol> functions;
  std::vector<GlobalSymbol> globals;

  const FunctionSymbol* function(std::string_view name) const;
  // Defined functions whose linkage makes them visible outside the module.
  std::set<std::string> public_functions() const;
  std::set<std::string> declared_functions() const;
};

ModuleSymbols scan_module(std::string_view text);

bool is_local_linkage(Linkage linkage);

}  // namespace intopt::ir
