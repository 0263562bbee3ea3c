#include "ksdf/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace ksdf::log {
namespace {

Level initial_level() {
  Level lvl = Level::warn;
  if (const char* env = std::getenv("KSDF_LOG")) parse_level(env, lvl);
  return lvl;
}

std::atomic<int>& current() {
  static std::atomic<int> value{static_cast<int>(initial_level())};
  return value;
}

}  // namespace

bool parse_level(const std::string& name, Level& out) {
  if (name == "error") out = Level::error;
  else if (name == "warn") out = Level::warn;
  else if (name == "info") out = Level::info;
  else if (name == "debug") out = Level::debug;
  else return false;
  return true;
}

Level level() { return static_cast<Level>(current().load()); }
void set_level(Level lvl) { current().store(static_cast<int>(lvl)); }

void write(Level lvl, const std::string& message) {
  static std::mutex mu;
  static constexpr const char* tags[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(mu);
  std::cerr << "[" << tags[static_cast<int>(lvl)] << "] " << message << "\n";
}

}  // namespace ksdf::log
