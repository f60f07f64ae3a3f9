#include "tomo/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace tomo {

namespace {

LogLevel level_from_env() {
    const char* e = std::getenv("TOMOALIGN_LOG");
    if (!e) return LogLevel::warn;
    if (std::strcmp(e, "error") == 0) return LogLevel::error;
    if (std::strcmp(e, "warn") == 0) return LogLevel::warn;
    if (std::strcmp(e, "info") == 0) return LogLevel::info;
    if (std::strcmp(e, "debug") == 0) return LogLevel::debug;
    return LogLevel::warn;
}

std::atomic<int> g_level{static_cast<int>(level_from_env())};

const char* tag(LogLevel l) {
    switch (l) {
        case LogLevel::error: return "error";
        case LogLevel::warn: return "warn";
        case LogLevel::info: return "info";
        default: return "debug";
    }
}

}  // namespace

void set_log_level(LogLevel level) { g_level.store(static_cast<int>(level)); }

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_message(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > g_level.load()) return;
    std::fprintf(stderr, "[tomoalign %s] %s\n", tag(level), msg.c_str());
}

}  // namespace tomo
