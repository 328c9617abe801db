#include "mcx/rational.hpp"

#include "mcx/error.hpp"

#include <cctype>

namespace mcx {

std::string to_string(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

Rational parse_rational(const std::string& text) {
    try {
        auto slash = text.find('/');
        if (slash != std::string::npos) {
            return Rational(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
        }
        auto dot = text.find('.');
        if (dot == std::string::npos) return Rational(std::stoll(text));
        std::string digits = text.substr(0, dot) + text.substr(dot + 1);
        std::int64_t den = 1;
        for (std::size_t i = dot + 1; i < text.size(); ++i) {
            if (!std::isdigit(static_cast<unsigned char>(text[i]))) fail(ErrorKind::schema, "bad rational '" + text + "'");
            den *= 10;
        }
        return Rational(std::stoll(digits), den);
    } catch (const std::logic_error&) {
        fail(ErrorKind::schema, "bad rational '" + text + "'");
    }
}

std::int64_t factorial(int n) {
    require(n >= 0 && n <= 20, ErrorKind::range, "factorial argument out of range");
    std::int64_t out = 1;
    for (int i = 2; i <= n; ++i) out *= i;
    return out;
}

}  // namespace mcx
