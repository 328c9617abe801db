#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcx {

enum class ErrorKind {
    degenerate_graph,
    ergodicity,
    empty_space,
    capacity,
    unsupported_operator,
    dimension,
    undefined_entropy,
    parameter,
    extension_mismatch,
    incomplete_flow,
    mode_violation,
    range,
    invalid_scheme,
    mode_required,
    vacuous_bound,
    schema,
    io,
    internal,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace mcx
