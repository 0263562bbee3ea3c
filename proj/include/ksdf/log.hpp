#pragma once

#include <sstream>
#include <string>

namespace ksdf::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Current threshold. Initialized from KSDF_LOG (error|warn|info|debug), default warn.
Level level();
void set_level(Level lvl);
bool parse_level(const std::string& name, Level& out);

void write(Level lvl, const std::string& message);

template <typename... Args>
void emit(Level lvl, const Args&... args) {
  if (static_cast<int>(lvl) > static_cast<int>(level())) return;
  std::ostringstream os;
  (os << ... << args);
  write(lvl, os.str());
}

template <typename... Args> void error(const Args&... a) { emit(Level::error, a...); }
template <typename... Args> void warn(const Args&... a) { emit(Level::warn, a...); }
template <typename... Args> void info(const Args&... a) { emit(Level::info, a...); }
template <typename... Args> void debug(const Args&... a) { emit(Level::debug, a...); }

}  // namespace ksdf::log
