#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace psybayes {

enum class ErrorKind {
  parameter,       // invalid distribution or prior parameters
  input,           // invalid argument to a pure function (NaN, out of range)
  data,            // invalid dataset contents
  spec,            // malformed prior / model specification
  boundary,        // derivative requested at a support boundary
  initialization,  // sampler could not find a finite starting point
  unsupported,     // operation not defined for this model kind
  comparison,      // incompatible fits passed to a comparison
  argument,        // bad command-line or API argument
  io,              // filesystem failures
  convergence,     // R-hat gate tripped
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace psybayes
