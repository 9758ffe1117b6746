#pragma once

#include <stdexcept>
#include <string>

namespace cup {

// Mirrors cup_status in cup.h; the C boundary maps one to the other.
enum class ErrorCode {
  kInvalidArgument = 1,
  kParse,
  kValidation,
  kIo,
  kConfig,
  kTransport,
  kCacheIntegrity,
  kNumeric,
  kContract,
  kInternal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& m) : Error(ErrorCode::kContract, m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorCode::kConfig, m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error(ErrorCode::kParse, m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error(ErrorCode::kValidation, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorCode::kIo, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error(ErrorCode::kNumeric, m) {}
};

class CacheIntegrityError : public Error {
 public:
  CacheIntegrityError(const std::string& key, const std::string& m)
      : Error(ErrorCode::kCacheIntegrity, m + " (key " + key + ")"), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class TransportKind { kAuth, kRateLimit, kMalformedReply, kUnavailable, kBackendConfig };

class TransportError : public Error {
 public:
  TransportError(TransportKind kind, const std::string& m)
      : Error(kind == TransportKind::kBackendConfig ? ErrorCode::kConfig : ErrorCode::kTransport, m),
        kind_(kind) {}
  TransportKind kind() const { return kind_; }

 private:
  TransportKind kind_;
};

}  // namespace cup
