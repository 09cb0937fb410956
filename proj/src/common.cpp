#include "intopt/error.hpp"
#include "intopt/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace intopt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidIr: return "InvalidIr";
    case ErrorKind::ToolMissing: return "ToolMissing";
    case ErrorKind::ToolFailure: return "ToolFailure";
    case ErrorKind::OverCap: return "OverCap";
    case ErrorKind::Precondition: return "PreconditionViolation";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SourceNotFound: return "SourceNotFound";
    case ErrorKind::BuildEmpty: return "BuildEmpty";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::ReplayMiss: return "ReplayMiss";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::MalformedStrategy: return "MalformedStrategy";
    case ErrorKind::NoCodeRegion: return "NoCodeRegion";
    case ErrorKind::SymbolClash: return "SymbolClash";
    case ErrorKind::UnsupportedSignature: return "UnsupportedSignature";
    case ErrorKind::BuildFailure: return "BuildFailure";
    case ErrorKind::TransformFailure: return "TransformFailure";
    case ErrorKind::RunFailure: return "RunFailure";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::KeyMismatch: return "KeyMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace log {
namespace {

std::atomic<Level> g_level{Level::Warning};
std::mutex g_mutex;

void emit(Level lvl, std::string_view tag, std::string_view message) {
  if (lvl < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "intopt: " << tag << ": " << message << '\n';
}

}  // namespace

void set_level(Level lvl) { g_level.store(lvl); }
Level level() { return g_level.load(); }

void debug(std::string_view m) { emit(Level::Debug, "debug", m); }
void info(std::string_view m) { emit(Level::Info, "info", m); }
void warning(std::string_view m) { emit(Level::Warning, "warning", m); }
void error(std::string_view m) { emit(Level::Error, "error", m); }

}  // namespace log
}  // namespace intopt
