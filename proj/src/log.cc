#include "uplift/log.h"

#include <atomic>
#include <iostream>
#include <mutex>

namespace uplift::log {
namespace {

std::atomic<Level> g_level{Level::kWarning};
std::mutex g_mutex;

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void warning(std::string_view message) {
  if (g_level.load() < Level::kWarning) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[warn] " << message << '\n';
}

void info(std::string_view message) {
  if (g_level.load() < Level::kInfo) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[info] " << message << '\n';
}

}  // namespace uplift::log
