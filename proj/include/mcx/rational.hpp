#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <string>

namespace mcx {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

std::string to_string(const Rational& r);

/// Parses "p/q", "p", or a decimal string that is exactly representable with a
/// power-of-ten denominator.
Rational parse_rational(const std::string& text);

std::int64_t factorial(int n);

}  // namespace mcx
