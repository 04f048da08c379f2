#pragma once

#include <cstdio>
#include <mutex>
#include <set>
#include <string>

namespace hccf {

inline bool& log_quiet() {
  static bool quiet = false;
  return quiet;
}

inline void log_info(const std::string& msg) {
  if (!log_quiet()) std::fprintf(stderr, "[hccf] %s\n", msg.c_str());
}

inline void log_warn(const std::string& msg) {
  if (!log_quiet()) std::fprintf(stderr, "[hccf] warning: %s\n", msg.c_str());
}

// Emits a warning at most once per key for the lifetime of the process.
// Used for conditions that would otherwise repeat every training step.
// Locked: ops that warn are callable from concurrent evaluation shards.
inline void warn_once(const std::string& key, const std::string& msg) {
  static std::mutex mu;
  static std::set<std::string> seen;
  bool fresh;
  {
    std::lock_guard<std::mutex> lock(mu);
    fresh = seen.insert(key).second;
  }
  if (fresh) log_warn(msg);
}

}  // namespace hccf
