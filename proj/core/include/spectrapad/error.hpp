#pragma once

#include <stdexcept>
#include <string>

namespace spectrapad {

enum class ErrorKind {
  kConfig,          // bad configuration or CLI usage
  kDimension,       // shape mismatch
  kProtocol,        // experiment protocol violated (missing class, empty split...)
  kData,            // malformed dataset or manifest
  kIo,              // filesystem failure
  kNumeric,         // non-finite loss or similar
  kDegenerateStats, // zero spread where a positive one is required
  kParameter,       // argument outside its legal range
  kState,           // operation called out of order
  kFusion,          // no usable band for a fused decision
  kCompatibility,   // checkpoint does not match config or dataset
  kUndefined,       // statistic undefined for the given input
};

/// Base error for the whole library. The kind decides the process exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// 0 success, 2 config/usage, 3 data/protocol, 4 numeric.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kParameter:
      return 2;
    case ErrorKind::kNumeric:
      return 4;
    default:
      return 3;
  }
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kProtocol: return "protocol error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kDegenerateStats: return "degenerate-stats error";
    case ErrorKind::kParameter: return "parameter error";
    case ErrorKind::kState: return "state error";
    case ErrorKind::kFusion: return "fusion error";
    case ErrorKind::kCompatibility: return "compatibility error";
    case ErrorKind::kUndefined: return "undefined-correlation error";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace spectrapad
