#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

namespace tsnwcd {

// Exact arithmetic for every time and data quantity inside the analyses.
// Floats only appear when values are reported.
using Rational = mpq_class;

// num/den in canonical form.
inline Rational ratio(long num, long den) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

// Parses "12", "-3", "0.75", "1e3", "2.5e-1" or "7/3" exactly.
// Throws std::invalid_argument on anything else.
Rational parse_rational(std::string_view text);

// Exact conversion from a double (every finite double is a dyadic rational).
Rational rational_from_double(double value);

double to_double(const Rational& value);

// Shortest exact decimal when the value has a terminating expansion,
// otherwise "p/q". Integers print without a decimal point.
std::string to_exact_string(const Rational& value);

// floor(value) as an integer.
mpz_class floor_of(const Rational& value);

bool is_integer(const Rational& value);

// Least common multiple of two positive rationals: the smallest positive
// rational that is an integer multiple of both.
Rational lcm(const Rational& a, const Rational& b);

}  // namespace tsnwcd
