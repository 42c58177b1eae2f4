#pragma once

#include <fmt/core.h>

#include <cstdio>
#include <string_view>

namespace acme::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// From ACME_LOG (error, warn, info, debug); warn when unset or unknown.
Level threshold();

inline bool enabled(Level level) { return static_cast<int>(level) <= static_cast<int>(threshold()); }

template <typename... Args>
void write(Level level, fmt::format_string<Args...> format, Args&&... args) {
    if (!enabled(level)) return;
    static constexpr std::string_view names[] = {"error", "warn", "info", "debug"};
    fmt::print(stderr, "acme [{}] {}\n", names[static_cast<int>(level)],
               fmt::format(format, std::forward<Args>(args)...));
}

}  // namespace acme::log
