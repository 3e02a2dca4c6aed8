#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string_view>

namespace survsel::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

inline std::atomic<Level>& threshold() {
  static std::atomic<Level> level{Level::Warn};
  return level;
}

inline void set_level(Level level) { threshold().store(level); }

namespace detail {

inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

inline constexpr std::string_view tag(Level level) {
  switch (level) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    default: return "";
  }
}

template <typename... Args>
void write(Level level, Args&&... args) {
  if (level < threshold().load()) return;
  std::ostringstream oss;
  oss << "[survsel " << tag(level) << "] ";
  (oss << ... << std::forward<Args>(args));
  oss << '\n';
  std::lock_guard lock(sink_mutex());
  std::cerr << oss.str();
}

}  // namespace detail

template <typename... Args>
void debug(Args&&... args) { detail::write(Level::Debug, std::forward<Args>(args)...); }
template <typename... Args>
void info(Args&&... args) { detail::write(Level::Info, std::forward<Args>(args)...); }
template <typename... Args>
void warn(Args&&... args) { detail::write(Level::Warn, std::forward<Args>(args)...); }
template <typename... Args>
void error(Args&&... args) { detail::write(Level::Error, std::forward<Args>(args)...); }

}  // namespace survsel::log
