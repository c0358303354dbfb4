#include "spnmkl/error.hpp"

namespace spnmkl {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::data: return "data";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::empty_model: return "empty_model";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::limit: return "limit";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace spnmkl
