#include "intopt/knowledge_base.hpp"

#include "intopt/error.hpp"
#include "intopt/log.hpp"
#include "intopt/process.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace intopt::kb {
namespace {

struct MacroInfo {
  std::string_view name;
  PassKind kind;
  bool analysis;
  bool with_params;
};

constexpr std::array kMacros = {
    MacroInfo{"MODULE_PASS", PassKind::Module, false, false},
    MacroInfo{"MODULE_PASS_WITH_PARAMS", PassKind::Module, false, true},
    MacroInfo{"CGSCC_PASS", PassKind::Cgscc, false, false},
    MacroInfo{"CGSCC_PASS_WITH_PARAMS", PassKind::Cgscc, false, true},
    MacroInfo{"FUNCTION_PASS", PassKind::Function, false, false},
    MacroInfo{"FUNCTION_PASS_WITH_PARAMS", PassKind::Function, false, true},
    MacroInfo{"LOOP_PASS", PassKind::Loop, false, false},
    MacroInfo{"LOOP_PASS_WITH_PARAMS", PassKind::Loop, false, true},
    MacroInfo{"LOOPNEST_PASS", PassKind::LoopNest, false, false},
    MacroInfo{"MACHINE_FUNCTION_PASS", PassKind::MachineFunction, false, false},
    MacroInfo{"MODULE_ANALYSIS", PassKind::Module, true, false},
    MacroInfo{"MODULE_ALIAS_ANALYSIS", PassKind::Module, true, false},
    MacroInfo{"CGSCC_ANALYSIS", PassKind::Cgscc, true, false},
    MacroInfo{"FUNCTION_ANALYSIS", PassKind::Function, true, false},
    MacroInfo{"FUNCTION_ALIAS_ANALYSIS", PassKind::Function, true, false},
    MacroInfo{"LOOP_ANALYSIS", PassKind::Loop, true, false},
    MacroInfo{"MACHINE_FUNCTION_ANALYSIS", PassKind::MachineFunction, true, false},
};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

void skip_space(std::string_view s, size_t& i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

std::optional<std::string> read_string_literal(std::string_view s, size_t& i) {
  if (i >= s.size() || s[i] != '"') return std::nullopt;
  std::string out;
  for (++i; i < s.size() && s[i] != '"'; ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) ++i;
    out.push_back(s[i]);
  }
  if (i >= s.size()) return std::nullopt;
  ++i;
  return out;
}

std::string read_qualified_identifier(std::string_view s, size_t& i) {
  size_t start = i;
  while (i < s.size() && (is_word_char(s[i]) || s[i] == ':')) ++i;
  return std::string(s.substr(start, i - start));
}

bool is_printer_like(const RegisteredPass& pass) {
  const auto& n = pass.registry_name;
  return n.starts_with("print") || n.starts_with("dot-") || n.starts_with("view-") ||
         pass.id.ends_with("PrinterPass");
}

int line_of(std::string_view text, size_t offset) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

std::string camel_words(std::string_view id) {
  std::string out;
  for (size_t i = 0; i < id.size(); ++i) {
    char c = id[i];
    bool upper = std::isupper(static_cast<unsigned char>(c));
    bool next_lower = i + 1 < id.size() && std::islower(static_cast<unsigned char>(id[i + 1]));
    bool prev_lower = i > 0 && std::islower(static_cast<unsigned char>(id[i - 1]));
    if (upper && i > 0 && (prev_lower || next_lower)) out.push_back(' ');
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

// Section keyed by pipeline name -> "Title. Body".
std::map<std::string, std::string> parse_rst_docs(std::string_view docs) {
  std::map<std::string, std::string> sections;
  std::vector<std::string_view> lines;
  for (size_t pos = 0; pos <= docs.size();) {
    size_t nl = docs.find('\n', pos);
    if (nl == std::string_view::npos) nl = docs.size();
    lines.push_back(docs.substr(pos, nl - pos));
    pos = nl + 1;
  }
  static const std::regex heading(R"(^``-?([A-Za-z0-9_<>.-]+)``\s*:\s*(.*)$)");
  auto is_underline = [](std::string_view l) {
    return l.size() >= 3 && l.find_first_not_of(l[0]) == std::string_view::npos &&
           (l[0] == '-' || l[0] == '=' || l[0] == '~' || l[0] == '^');
  };
  std::string current;
  std::string body;
  auto flush = [&] {
    if (!current.empty()) sections[current] = collapse_whitespace(body);
    body.clear();
  };
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string line(lines[i]);
    std::smatch m;
    if (std::regex_match(line, m, heading) && i + 1 < lines.size() && is_underline(lines[i + 1])) {
      flush();
      current = m[1];
      std::string title = collapse_whitespace(m[2].str());
      body = title.empty() ? "" : title + (title.ends_with(".") ? " " : ". ");
      ++i;
      continue;
    }
    // Any other section heading ends the current pass section.
    if (i + 1 < lines.size() && !line.empty() && is_underline(lines[i + 1]) && !is_underline(line)) {
      flush();
      current.clear();
      ++i;
      continue;
    }
    if (!current.empty()) {
      body += line;
      body += '\n';
    }
  }
  flush();
  return sections;
}

std::string strip_tags(std::string_view html) {
  std::string out;
  bool in_tag = false;
  for (char c : html) {
    if (c == '<') in_tag = true;
    else if (c == '>') in_tag = false;
    else if (!in_tag) out.push_back(c);
  }
  auto replace_all = [&](std::string_view from, std::string_view to) {
    for (size_t p = out.find(from); p != std::string::npos; p = out.find(from, p + to.size()))
      out.replace(p, from.size(), to);
  };
  replace_all("&lt;", "<");
  replace_all("&gt;", ">");
  replace_all("&quot;", "\"");
  replace_all("&amp;", "&");
  return out;
}

std::map<std::string, std::string> parse_html_docs(std::string_view docs) {
  std::map<std::string, std::string> sections;
  static const std::regex heading(R"(<h[1-6][^>]*>([\s\S]*?)</h[1-6]>)", std::regex::icase);
  static const std::regex name_title(R"(^\s*-?([A-Za-z0-9_<>.-]+)\s*:\s*([\s\S]*)$)");
  std::string text(docs);
  std::vector<std::pair<size_t, std::smatch>> heads;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), heading); it != std::sregex_iterator(); ++it)
    heads.emplace_back(static_cast<size_t>(it->position()), *it);
  for (size_t h = 0; h < heads.size(); ++h) {
    std::string title_text = strip_tags(heads[h].second[1].str());
    std::smatch m;
    if (!std::regex_match(title_text, m, name_title)) continue;
    size_t body_begin = heads[h].first + heads[h].second.length();
    size_t body_end = h + 1 < heads.size() ? heads[h + 1].first : text.size();
    std::string title = collapse_whitespace(m[2].str());
    std::string body = collapse_whitespace(strip_tags(std::string_view(text).substr(body_begin, body_end - body_begin)));
    sections[m[1]] = title + (title.ends_with(".") ? " " : ". ") + body;
  }
  return sections;
}

// Maps class name -> files defining `Class::run(`, plus files by stem.
class SourceIndex {
 public:
  explicit SourceIndex(const fs::path& root) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) return;
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(root, ec); it != fs::recursive_directory_iterator(); ++it) {
      auto ext = it->path().extension();
      if (it->is_regular_file() && (ext == ".cpp" || ext == ".h" || ext == ".cc")) files.push_back(it->path());
    }
    std::sort(files.begin(), files.end());
    static const std::regex run_def(R"(\b([A-Za-z_]\w*)\s*::\s*run\s*\()");
    for (const auto& file : files) {
      std::string text = read_file(file);
      by_stem_[file.stem().string()].push_back(file);
      for (auto it = std::sregex_iterator(text.begin(), text.end(), run_def); it != std::sregex_iterator(); ++it) {
        auto& v = by_run_[(*it)[1]];
        if (v.empty() || v.back() != file) v.push_back(file);
      }
    }
  }

  std::vector<fs::path> files_for(std::string_view pass_id) const {
    std::set<fs::path> out;
    auto add = [&](const auto& table, const std::string& key) {
      if (auto it = table.find(key); it != table.end()) out.insert(it->second.begin(), it->second.end());
    };
    std::string id(pass_id);
    add(by_stem_, id);
    add(by_run_, id);
    return {out.begin(), out.end()};
  }

 private:
  std::map<std::string, std::vector<fs::path>> by_stem_;
  std::map<std::string, std::vector<fs::path>> by_run_;
};

DepScan scan_files(const std::vector<fs::path>& files, const DepScanOptions& options) {
  DepScan scan;
  static const std::regex call(R"(\bget(Cached)?Result\s*<)");
  for (const auto& file : files) {
    std::string text = read_file(file);
    std::string display = options.relative_to ? fs::relative(file, *options.relative_to).generic_string()
                                              : file.generic_string();
    scan.files.push_back(display);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), call); it != std::sregex_iterator(); ++it) {
      size_t pos = static_cast<size_t>(it->position());
      size_t line_start = text.rfind('\n', pos);
      line_start = line_start == std::string::npos ? 0 : line_start + 1;
      std::string_view prefix = std::string_view(text).substr(line_start, pos - line_start);
      if (prefix.find("//") != std::string_view::npos) continue;
      // Template argument with balanced angle brackets.
      size_t open = pos + static_cast<size_t>(it->length()) - 1;
      int depth = 0;
      size_t close = open;
      for (; close < text.size(); ++close) {
        if (text[close] == '<') ++depth;
        if (text[close] == '>' && --depth == 0) break;
      }
      if (close >= text.size()) continue;
      std::string name = normalize_analysis_name(std::string_view(text).substr(open + 1, close - open - 1));
      if (name.empty()) continue;
      bool cached = (*it)[1].matched;
      bool is_analysis = name.ends_with("Analysis") || options.analysis_registry.contains(name);
      if (!is_analysis) continue;
      scan.evidence.push_back({name, {display, line_of(text, pos)}, cached});
      if (!cached || options.include_cached) scan.deps.insert(name);
    }
  }
  if (scan.deps.empty())
    scan.warnings.push_back("no getResult call sites found in " + std::to_string(files.size()) + " file(s)");
  return scan;
}

std::string read_llvm_version(const fs::path& root) {
  static const std::regex major(R"(set\(LLVM_VERSION_MAJOR\s+(\d+)\))");
  static const std::regex minor(R"(set\(LLVM_VERSION_MINOR\s+(\d+)\))");
  static const std::regex patch(R"(set\(LLVM_VERSION_PATCH\s+(\d+)\))");
  for (const auto& candidate : {root / "cmake" / "Modules" / "LLVMVersion.cmake", root / "CMakeLists.txt",
                                root.parent_path() / "cmake" / "Modules" / "LLVMVersion.cmake"}) {
    std::error_code ec;
    if (!fs::is_regular_file(candidate, ec)) continue;
    std::string text = read_file(candidate);
    std::smatch a, b, c;
    if (std::regex_search(text, a, major) && std::regex_search(text, b, minor) && std::regex_search(text, c, patch))
      return a[1].str() + "." + b[1].str() + "." + c[1].str();
  }
  return "unknown";
}

}  // namespace

std::set<std::string> RegistryScan::analysis_ids() const {
  std::set<std::string> ids;
  for (const auto& a : analyses) ids.insert(a.id);
  return ids;
}

std::string normalize_analysis_name(std::string_view raw) {
  std::string_view s = raw;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  if (s.starts_with("typename ")) s.remove_prefix(9);
  s = s.substr(0, s.find('<'));
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (auto colon = s.rfind("::"); colon != std::string_view::npos) s = s.substr(colon + 2);
  return std::string(s);
}

RegistryScan extract_pass_registry(std::string_view src) {
  RegistryScan scan;
  std::set<std::string> seen_transforms, seen_analyses;
  size_t recognized = 0;
  size_t i = 0;
  while (i < src.size()) {
    char c = src[i];
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      i = src.find('\n', i);
      if (i == std::string_view::npos) break;
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      i = src.find("*/", i + 2);
      if (i == std::string_view::npos) break;
      i += 2;
      continue;
    }
    if (c == '"') {
      read_string_literal(src, i);
      continue;
    }
    if (!is_word_char(c) || (i > 0 && is_word_char(src[i - 1]))) {
      ++i;
      continue;
    }
    size_t word_end = i;
    while (word_end < src.size() && is_word_char(src[word_end])) ++word_end;
    std::string_view word = src.substr(i, word_end - i);
    auto macro = std::find_if(kMacros.begin(), kMacros.end(), [&](const MacroInfo& m) { return m.name == word; });
    i = word_end;
    if (macro == kMacros.end()) continue;
    size_t j = word_end;
    skip_space(src, j);
    if (j >= src.size() || src[j] != '(') continue;
    ++j;
    skip_space(src, j);
    auto registry_name = read_string_literal(src, j);
    if (!registry_name) continue;  // the #define line itself
    skip_space(src, j);
    if (j >= src.size() || src[j] != ',') continue;
    ++j;
    skip_space(src, j);
    std::string class_name;
    if (macro->with_params) {
      auto quoted = read_string_literal(src, j);
      if (!quoted) continue;
      class_name = *quoted;
    } else {
      class_name = read_qualified_identifier(src, j);
    }
    class_name = normalize_analysis_name(class_name);
    if (class_name.empty()) continue;
    ++recognized;
    i = j;
    RegisteredPass pass{class_name, *registry_name, macro->kind, macro->analysis};
    if (pass.analysis) {
      if (seen_analyses.insert(pass.id).second) scan.analyses.push_back(std::move(pass));
    } else if (!is_printer_like(pass) && seen_transforms.insert(pass.id).second) {
      scan.transforms.push_back(std::move(pass));
    }
  }
  if (recognized == 0) throw Error(ErrorKind::ParseError, "no pass registry macro entries recognized");
  return scan;
}

DepScan extract_deps(std::string_view pass_id, const fs::path& transforms_root, const DepScanOptions& options) {
  SourceIndex index(transforms_root);
  auto files = index.files_for(pass_id);
  if (files.empty())
    throw Error(ErrorKind::SourceNotFound, "no implementation file for " + std::string(pass_id) + " under " +
                                               transforms_root.string());
  auto scan = scan_files(files, options);
  for (const auto& w : scan.warnings) log::warning(std::string(pass_id) + ": " + w);
  return scan;
}

std::string fallback_description(const RegisteredPass& pass) {
  return "Transform pass " + pass.registry_name + " (" + pass.id + "): " + camel_words(pass.id) + ".";
}

std::map<std::string, std::string> attach_descriptions(const std::vector<RegisteredPass>& passes,
                                                       std::string_view docs_source) {
  bool html = docs_source.find("<h") != std::string_view::npos && docs_source.find("</h") != std::string_view::npos;
  auto sections = html ? parse_html_docs(docs_source) : parse_rst_docs(docs_source);
  std::map<std::string, std::string> out;
  for (const auto& pass : passes) {
    auto it = sections.find(pass.registry_name);
    out[pass.id] = (it != sections.end() && !it->second.empty()) ? it->second : fallback_description(pass);
  }
  return out;
}

const PassEntry* KnowledgeBase::find(std::string_view id) const {
  auto it = entries.find(std::string(id));
  return it == entries.end() ? nullptr : &it->second;
}

KnowledgeBase build_kb(const fs::path& root, std::string_view docs_source, const BuildOptions& options) {
  auto registry_path = root / "lib" / "Passes" / "PassRegistry.def";
  std::error_code ec;
  if (!fs::is_regular_file(registry_path, ec))
    throw Error(ErrorKind::BuildEmpty, "no PassRegistry.def under " + root.string());
  auto registry = extract_pass_registry(read_file(registry_path));
  auto descriptions = attach_descriptions(registry.transforms, docs_source);

  DepScanOptions scan_options;
  scan_options.include_cached = options.include_cached;
  scan_options.analysis_registry = registry.analysis_ids();
  scan_options.relative_to = root;
  SourceIndex index(root / "lib" / "Transforms");

  KnowledgeBase kb;
  kb.llvm_version = read_llvm_version(root);
  kb.built_at = options.built_at;
  for (const auto& pass : registry.transforms) {
    auto files = index.files_for(pass.id);
    if (files.empty()) {
      log::debug("skipping " + pass.id + ": no implementation under lib/Transforms");
      continue;
    }
    auto scan = scan_files(files, scan_options);
    PassEntry entry;
    entry.id = pass.id;
    entry.desc = descriptions.at(pass.id);
    entry.deps = scan.deps;
    std::set<Evidence> locations;
    for (const auto& ev : scan.evidence)
      if (entry.deps.contains(ev.analysis)) locations.insert(ev.where);
    entry.source_locations.assign(locations.begin(), locations.end());
    kb.entries.emplace(entry.id, std::move(entry));
  }
  if (kb.entries.empty()) throw Error(ErrorKind::BuildEmpty, "no pass entries survived extraction");
  return kb;
}

std::string serialize(const KnowledgeBase& kb) {
  ordered_json doc;
  doc["llvm_version"] = kb.llvm_version;
  doc["built_at"] = kb.built_at;
  doc["entries"] = ordered_json::array();
  for (const auto& [id, entry] : kb.entries) {
    ordered_json e;
    e["id"] = entry.id;
    e["desc"] = entry.desc;
    e["deps"] = ordered_json(std::vector<std::string>(entry.deps.begin(), entry.deps.end()));
    e["evidence"] = ordered_json::array();
    for (const auto& ev : entry.source_locations) e["evidence"].push_back({{"file", ev.file}, {"line", ev.line}});
    doc["entries"].push_back(std::move(e));
  }
  return doc.dump(2) + "\n";
}

KnowledgeBase deserialize(std::string_view json_text) {
  try {
    auto doc = nlohmann::json::parse(json_text);
    KnowledgeBase kb;
    kb.llvm_version = doc.at("llvm_version").get<std::string>();
    kb.built_at = doc.at("built_at").get<std::string>();
    for (const auto& e : doc.at("entries")) {
      PassEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.desc = e.at("desc").get<std::string>();
      for (const auto& d : e.at("deps")) entry.deps.insert(d.get<std::string>());
      for (const auto& ev : e.value("evidence", nlohmann::json::array()))
        entry.source_locations.push_back({ev.at("file").get<std::string>(), ev.at("line").get<int>()});
      if (kb.entries.contains(entry.id)) throw Error(ErrorKind::ParseError, "duplicate KB entry " + entry.id);
      kb.entries.emplace(entry.id, std::move(entry));
    }
    return kb;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed knowledge base: ") + e.what());
  }
}

KnowledgeBase load_kb(const fs::path& path) { return deserialize(read_file(path)); }

void save_kb(const KnowledgeBase& kb, const fs::path& path) { write_file(path, serialize(kb)); }

}  // namespace intopt::kb
