#include "intopt/ir_text.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace intopt::ir {
namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '-' || c == '$' || c == '.' || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

bool is_bare_identifier(std::string_view name) {
  if (name.empty()) return false;
  if (std::all_of(name.begin(), name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return true;
  return is_ident_start(name.front()) && std::all_of(name.begin(), name.end(), is_ident_char);
}

// Reads the identifier that follows a sigil at text[pos]. Returns the
// unquoted name and the index one past its end, or nullopt when the sigil is
// not followed by an identifier.
std::optional<std::pair<std::string, size_t>> read_identifier(std::string_view text, size_t pos, bool allow_named) {
  size_t i = pos;
  if (i >= text.size()) return std::nullopt;
  if (text[i] == '"') {
    size_t close = text.find('"', i + 1);
    if (close == std::string_view::npos) return std::nullopt;
    return std::pair{std::string(text.substr(i + 1, close - i - 1)), close + 1};
  }
  if (std::isdigit(static_cast<unsigned char>(text[i]))) {
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    return std::pair{std::string(text.substr(pos, i - pos)), i};
  }
  if (!allow_named || !is_ident_start(text[i])) return std::nullopt;
  while (i < text.size() && is_ident_char(text[i])) ++i;
  return std::pair{std::string(text.substr(pos, i - pos)), i};
}

const std::map<std::string_view, Linkage>& linkage_keywords() {
  static const std::map<std::string_view, Linkage> table = {
      {"private", Linkage::Private},
      {"internal", Linkage::Internal},
      {"weak", Linkage::Weak},
      {"weak_odr", Linkage::WeakOdr},
      {"linkonce", Linkage::Linkonce},
      {"linkonce_odr", Linkage::LinkonceOdr},
      {"common", Linkage::Common},
      {"appending", Linkage::Appending},
      {"extern_weak", Linkage::ExternWeak},
      {"available_externally", Linkage::AvailableExternally},
      {"external", Linkage::External},
  };
  return table;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Splits at top-level commas, honoring (), <>, {}, [] and string literals.
std::vector<std::string_view> split_top_level(std::string_view s) {
  std::vector<std::string_view> parts;
  int depth = 0;
  size_t start = 0;
  bool in_string = false;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '"') in_string = !in_string;
    if (in_string) continue;
    if (c == '(' || c == '<' || c == '{' || c == '[') ++depth;
    else if (c == ')' || c == '>' || c == '}' || c == ']') --depth;
    else if (c == ',' && depth == 0) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  auto last = trim(s.substr(start));
  if (!last.empty() || !parts.empty()) parts.push_back(last);
  return parts;
}

// Finds the closing parenthesis matching the one at `open`.
size_t matching_paren(std::string_view s, size_t open) {
  int depth = 0;
  bool in_string = false;
  for (size_t i = open; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    if (in_string) continue;
    if (s[i] == '(') ++depth;
    if (s[i] == ')' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

// Consumes one type from the front of `s`.
std::string leading_type(std::string_view s) {
  s = trim(s);
  size_t i = 0;
  if (!s.empty() && (s[0] == '{' || s[0] == '<' || s[0] == '[')) {
    int depth = 0;
    for (; i < s.size(); ++i) {
      if (s[i] == '{' || s[i] == '<' || s[i] == '[' || s[i] == '(') ++depth;
      else if (s[i] == '}' || s[i] == '>' || s[i] == ']' || s[i] == ')') {
        if (--depth == 0) {
          ++i;
          break;
        }
      }
    }
  } else {
    if (i < s.size() && s[i] == '%') ++i;
    if (i < s.size() && s[i] == '"') {
      size_t close = s.find('"', i + 1);
      i = close == std::string_view::npos ? s.size() : close + 1;
    } else {
      while (i < s.size() && is_ident_char(s[i])) ++i;
    }
    if (s.substr(i).starts_with(" addrspace(")) i = s.find(')', i) + 1;
  }
  // Pointer stars and function-type parameter lists.
  for (;;) {
    size_t j = i;
    while (j < s.size() && s[j] == ' ') ++j;
    if (j < s.size() && s[j] == '*') {
      i = j + 1;
    } else if (j < s.size() && s[j] == '(') {
      size_t close = matching_paren(s, j);
      if (close == std::string_view::npos) break;
      i = close + 1;
    } else {
      break;
    }
  }
  return std::string(trim(s.substr(0, i)));
}

bool is_return_attribute(std::string_view word) {
  static const std::set<std::string_view> words = {
      "noundef", "signext", "zeroext", "inreg", "noalias", "nonnull", "dso_local", "dso_preemptable",
      "hidden", "protected", "default", "dllimport", "dllexport", "unnamed_addr", "local_unnamed_addr",
      "fastcc", "coldcc", "ccc", "tailcc", "swiftcc", "preserve_mostcc", "preserve_allcc", "ghccc",
  };
  return words.contains(word);
}

// Parses "<prefix words> <ret type>" appearing between define/declare and @name.
void parse_prefix(std::string_view prefix, FunctionSymbol& fn) {
  prefix = trim(prefix);
  while (!prefix.empty()) {
    size_t end = 0;
    while (end < prefix.size() && !std::isspace(static_cast<unsigned char>(prefix[end])) && prefix[end] != '(')
      ++end;
    std::string_view word = prefix.substr(0, end);
    bool has_parens = end < prefix.size() && prefix[end] == '(';
    if (auto it = linkage_keywords().find(word); it != linkage_keywords().end()) {
      fn.linkage = it->second;
    } else if (has_parens && (word == "dereferenceable" || word == "dereferenceable_or_null" || word == "range" ||
                              word == "nofpclass" || word == "addrspace")) {
      end = prefix.find(')', end) + 1;
    } else if (word == "align" || word == "cc") {
      size_t next = prefix.find_first_not_of(' ', end);
      end = prefix.find(' ', next == std::string_view::npos ? prefix.size() : next);
      if (end == std::string_view::npos) end = prefix.size();
    } else if (word.starts_with("cc") && word.size() > 2 && std::isdigit(static_cast<unsigned char>(word[2]))) {
    } else if (!is_return_attribute(word)) {
      fn.return_type = leading_type(prefix);
      return;
    }
    prefix = trim(prefix.substr(std::min(end, prefix.size())));
  }
}

std::optional<FunctionSymbol> parse_function_header(std::string_view text, size_t line_begin, bool definition) {
  size_t kw_len = definition ? 6 : 7;
  size_t at = line_begin + kw_len;
  // Find the function name: first '@' outside strings.
  size_t name_pos = std::string_view::npos;
  bool in_string = false;
  for (size_t i = at; i < text.size() && text[i] != '\n'; ++i) {
    if (text[i] == '"') in_string = !in_string;
    if (!in_string && text[i] == '@') {
      name_pos = i;
      break;
    }
  }
  if (name_pos == std::string_view::npos) return std::nullopt;
  auto ident = read_identifier(text, name_pos + 1, true);
  if (!ident) return std::nullopt;
  FunctionSymbol fn;
  fn.name = ident->first;
  fn.is_definition = definition;
  fn.begin = line_begin;
  parse_prefix(text.substr(at, name_pos - at), fn);
  size_t open = ident->second;
  if (open >= text.size() || text[open] != '(') return std::nullopt;
  size_t close = matching_paren(text, open);
  if (close == std::string_view::npos) return std::nullopt;
  for (auto param : split_top_level(text.substr(open + 1, close - open - 1))) {
    if (param.empty()) continue;
    if (param == "...") {
      fn.varargs = true;
      continue;
    }
    fn.param_types.push_back(leading_type(param));
  }
  if (definition) {
    size_t brace = close;
    in_string = false;
    for (; brace < text.size(); ++brace) {
      if (text[brace] == '"') in_string = !in_string;
      if (!in_string && text[brace] == '{') break;
    }
    fn.end = std::min(brace + 1, text.size());
  } else {
    size_t nl = text.find('\n', close);
    fn.end = nl == std::string_view::npos ? text.size() : nl;
  }
  return fn;
}

std::optional<GlobalSymbol> parse_global(std::string_view line) {
  auto ident = read_identifier(line, 1, true);
  if (!ident) return std::nullopt;
  std::string_view rest = trim(line.substr(ident->second));
  if (!rest.starts_with("=")) return std::nullopt;
  rest = trim(rest.substr(1));
  GlobalSymbol g;
  g.name = ident->first;
  while (!rest.empty()) {
    size_t end = rest.find(' ');
    std::string_view word = rest.substr(0, end);
    if (auto it = linkage_keywords().find(word); it != linkage_keywords().end()) {
      g.linkage = it->second;
      if (word == "external" || word == "extern_weak") g.is_external_declaration = true;
    } else if (word == "global" || word == "constant" || word == "alias" || word == "ifunc") {
      break;
    }
    if (end == std::string_view::npos) break;
    rest = trim(rest.substr(end));
  }
  return g;
}

}  // namespace

std::string format_identifier(char sigil, std::string_view name) {
  std::string out(1, sigil);
  if (is_bare_identifier(name)) {
    out += name;
  } else {
    out += '"';
    out += name;
    out += '"';
  }
  return out;
}

std::string rewrite_identifiers(
    std::string_view text,
    const std::function<std::optional<std::string>(SigilKind, std::string_view)>& rename) {
  std::string out;
  out.reserve(text.size() + text.size() / 16);
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == ';') {
      size_t nl = text.find('\n', i);
      if (nl == std::string_view::npos) nl = text.size();
      out.append(text.substr(i, nl - i));
      i = nl;
      continue;
    }
    if (c == '"') {
      size_t close = text.find('"', i + 1);
      if (close == std::string_view::npos) close = text.size() - 1;
      out.append(text.substr(i, close - i + 1));
      i = close + 1;
      continue;
    }
    // A sigil only starts an identifier at a token boundary.
    bool boundary = i == 0 || !is_ident_char(text[i - 1]);
    if (boundary && (c == '@' || c == '%' || c == '!' || c == '#' || c == '$')) {
      SigilKind kind = c == '@'   ? SigilKind::Global
                       : c == '%' ? SigilKind::Local
                       : c == '!' ? SigilKind::Metadata
                       : c == '#' ? SigilKind::AttrGroup
                                  : SigilKind::Comdat;
      bool allow_named = kind != SigilKind::AttrGroup;
      // `!"..."` is a metadata string, not an identifier.
      bool string_operand = kind == SigilKind::Metadata && i + 1 < text.size() && text[i + 1] == '"';
      auto ident = string_operand ? std::nullopt : read_identifier(text, i + 1, allow_named);
      if (ident) {
        auto replacement = rename(kind, ident->first);
        if (replacement) out += format_identifier(c, *replacement);
        else out.append(text.substr(i, ident->second - i));
        i = ident->second;
        continue;
      }
    }
    if (is_ident_char(c)) {
      // Copy whole words so sigils embedded in identifiers (a$b) stay put.
      size_t j = i;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      out.append(text.substr(i, j - i));
      i = j;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

bool is_local_linkage(Linkage linkage) { return linkage == Linkage::Private || linkage == Linkage::Internal; }

const FunctionSymbol* ModuleSymbols::function(std::string_view name) const {
  for (const auto& fn : functions)
    if (fn.name == name) return &fn;
  return nullptr;
}

std::set<std::string> ModuleSymbols::public_functions() const {
  std::set<std::string> out;
  for (const auto& fn : functions)
    if (fn.is_definition && !is_local_linkage(fn.linkage)) out.insert(fn.name);
  return out;
}

std::set<std::string> ModuleSymbols::declared_functions() const {
  std::set<std::string> out;
  for (const auto& fn : functions)
    if (!fn.is_definition) out.insert(fn.name);
  return out;
}

ModuleSymbols scan_module(std::string_view text) {
  ModuleSymbols symbols;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (line.starts_with("define ") || line.starts_with("define\t")) {
      if (auto fn = parse_function_header(text, pos, true)) symbols.functions.push_back(std::move(*fn));
    } else if (line.starts_with("declare ") || line.starts_with("declare\t")) {
      if (auto fn = parse_function_header(text, pos, false)) symbols.functions.push_back(std::move(*fn));
    } else if (line.starts_with("@")) {
      if (auto g = parse_global(line)) symbols.globals.push_back(std::move(*g));
    }
    pos = nl + 1;
  }
  return symbols;
}

}  // namespace intopt::ir
