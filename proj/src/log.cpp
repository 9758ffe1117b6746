#include "cup/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include <cstdlib>

namespace cup {

std::shared_ptr<spdlog::logger> logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto l = std::make_shared<spdlog::logger>("cup", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("CUP_LOG_LEVEL")) l->set_level(spdlog::level::from_str(env));
    l->set_pattern("[%l] %v");
    return l;
  }();
  return instance;
}

}  // namespace cup
