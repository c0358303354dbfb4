#pragma once

#include <stdexcept>
#include <string>

namespace spnmkl {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  parse,        // malformed structure/config/model document
  data,         // dataset problems, dimension mismatch
  degenerate,   // training problem has no meaningful solution (single class ...)
  empty_model,  // pruning or zero weights left no active path
  numeric,      // continuity violation, singular gradient, invalid kernel
  limit,        // configured cap exceeded (path count)
  io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace spnmkl
