#pragma once

#include <stdexcept>
#include <string>

namespace spes {

enum class ErrorKind {
  format,      // malformed on-disk cohort / manifest / checkpoint
  integrity,   // references that do not resolve (stim electrode, channel id)
  label,       // missing or invalid SOZ label
  config,      // invalid configuration value
  missing_data,
  shape,       // tensor / channel-count mismatch
  degenerate,  // zero-variance or otherwise unusable data
  autodiff,    // non-finite or detached graph
  input,       // bad arguments to a metric / statistic
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::format: return "format";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::label: return "label";
    case ErrorKind::config: return "config";
    case ErrorKind::missing_data: return "missing-data";
    case ErrorKind::shape: return "shape";
    case ErrorKind::degenerate: return "degenerate-data";
    case ErrorKind::autodiff: return "autodiff";
    case ErrorKind::input: return "input";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace spes
