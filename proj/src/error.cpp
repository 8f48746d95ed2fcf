#include "psybayes/error.hpp"

namespace psybayes {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::input: return "input error";
    case ErrorKind::data: return "data error";
    case ErrorKind::spec: return "spec error";
    case ErrorKind::boundary: return "boundary error";
    case ErrorKind::initialization: return "initialization error";
    case ErrorKind::unsupported: return "unsupported operation";
    case ErrorKind::comparison: return "comparison error";
    case ErrorKind::argument: return "argument error";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::convergence: return "convergence error";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace psybayes
