#include "cup/error.hpp"

namespace cup {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kCacheIntegrity: return "cache_integrity";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace cup
