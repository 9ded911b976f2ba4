#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pnlab {

enum class ErrorKind {
  InvalidOrder,
  InvalidArgument,
  OutOfDomain,
  ShapeMismatch,
  UnsupportedDimension,
  InterfaceStraddle,
  SingularSystem,
  NonFinite,
  UndefinedError,
  ZeroSource,
  Parse,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception; `kind()` is stable and used by the CLI for the
/// machine-readable error report.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pnlab
