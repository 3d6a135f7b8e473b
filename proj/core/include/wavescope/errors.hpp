#pragma once

#include <stdexcept>
#include <string>

namespace wavescope {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Precondition violations: bad parameter values, non-finite inputs, empty data.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Tensor/matrix dimension mismatches and inconsistent layer chains.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Distinguishable faults while reading persisted artifacts.
enum class FormatFault {
  bad_magic,
  unknown_version,
  malformed_header,
  length_mismatch,
  bad_label,
  bad_value,
};

class FormatError : public Error {
public:
  FormatError(FormatFault fault, const std::string& what) : Error(what), fault_(fault) {}
  FormatFault fault() const { return fault_; }

private:
  FormatFault fault_;
};

/// Config-file parse errors carry the offending 1-based line number (0 = whole file).
class ConfigError : public Error {
public:
  ConfigError(int line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

} // namespace wavescope
