#pragma once

#include <spdlog/spdlog.h>

#include <memory>

namespace cup {

// Shared stderr logger ("cup"). Level defaults to warn; CUP_LOG_LEVEL
// (trace/debug/info/warn/error/off) overrides it.
std::shared_ptr<spdlog::logger> logger();

}  // namespace cup
