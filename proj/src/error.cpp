#include "pnlab/error.hpp"

namespace pnlab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidOrder: return "invalid_order";
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::OutOfDomain: return "out_of_domain";
    case ErrorKind::ShapeMismatch: return "shape_mismatch";
    case ErrorKind::UnsupportedDimension: return "unsupported_dimension";
    case ErrorKind::InterfaceStraddle: return "interface_straddle";
    case ErrorKind::SingularSystem: return "singular_system";
    case ErrorKind::NonFinite: return "non_finite";
    case ErrorKind::UndefinedError: return "undefined_error";
    case ErrorKind::ZeroSource: return "zero_source";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace pnlab
