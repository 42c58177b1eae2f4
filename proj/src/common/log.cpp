#include "acme/common/log.hpp"

#include <cstdlib>
#include <string>

namespace acme::log {

Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("ACME_LOG");
        const std::string v = env ? env : "";
        if (v == "error") return Level::kError;
        if (v == "info") return Level::kInfo;
        if (v == "debug") return Level::kDebug;
        return Level::kWarn;
    }();
    return level;
}

}  // namespace acme::log
