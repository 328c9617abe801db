#include "mcx/error.hpp"

namespace mcx {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::degenerate_graph: return "degenerate graph";
        case ErrorKind::ergodicity: return "ergodicity";
        case ErrorKind::empty_space: return "empty space";
        case ErrorKind::capacity: return "capacity";
        case ErrorKind::unsupported_operator: return "unsupported operator";
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::undefined_entropy: return "undefined entropy";
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::extension_mismatch: return "extension mismatch";
        case ErrorKind::incomplete_flow: return "incomplete flow";
        case ErrorKind::mode_violation: return "mode violation";
        case ErrorKind::range: return "range";
        case ErrorKind::invalid_scheme: return "invalid scheme";
        case ErrorKind::mode_required: return "mode required";
        case ErrorKind::vacuous_bound: return "vacuous bound";
        case ErrorKind::schema: return "schema";
        case ErrorKind::io: return "io";
        case ErrorKind::internal: return "internal";
    }
    return "unknown";
}

}  // namespace mcx
