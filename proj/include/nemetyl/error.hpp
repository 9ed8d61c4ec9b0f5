#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nemetyl {

enum class ErrorKind {
  Contract,     // caller broke an operation precondition
  Format,       // malformed input bytes / text
  Unsupported,  // well-formed but not handled (link type, ...)
  EmptyTrace,   // nothing left to analyze
  Precondition, // missing data required by the chosen operation
  Config,       // parameters cannot be derived or are out of range
  Degenerate,   // trace carries no usable structure (e.g. all identical)
  MissingTruth, // evaluation requested without labels
  Dependency,   // staged run is missing an intermediate artifact
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Contract: return "contract violation";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Unsupported: return "unsupported input";
    case ErrorKind::EmptyTrace: return "empty trace";
    case ErrorKind::Precondition: return "precondition error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Degenerate: return "degenerate trace";
    case ErrorKind::MissingTruth: return "missing ground truth";
    case ErrorKind::Dependency: return "missing dependency";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code for a failure of the given kind (0 is reserved for success).
constexpr int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Format:
    case ErrorKind::Unsupported:
    case ErrorKind::EmptyTrace:
    case ErrorKind::Precondition:
    case ErrorKind::MissingTruth:
      return 2;
    case ErrorKind::Config:
    case ErrorKind::Degenerate:
      return 3;
    case ErrorKind::Io:
    case ErrorKind::Dependency:
      return 4;
    case ErrorKind::Contract:
      return 1;
  }
  return 1;
}

inline void require(bool condition, std::string_view what) {
  if (!condition) throw Error(ErrorKind::Contract, std::string(what));
}

}  // namespace nemetyl
