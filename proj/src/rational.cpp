#include "tsnwcd/rational.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace tsnwcd {
namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

mpz_class pow10(unsigned long exponent) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, exponent);
  return r;
}

[[noreturn]] void bad(std::string_view text) {
  throw std::invalid_argument("not a number: '" + std::string(text) + "'");
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string_view s = text;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) bad(text);

  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(s.substr(0, slash));
    Rational den = parse_rational(s.substr(slash + 1));
    if (den == 0) bad(text);
    Rational r = num / den;
    r.canonicalize();
    return r;
  }

  bool negative = false;
  if (s.front() == '+' || s.front() == '-') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }

  long exponent = 0;
  if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    std::string_view exp_part = s.substr(e + 1);
    bool exp_negative = false;
    if (!exp_part.empty() && (exp_part.front() == '+' || exp_part.front() == '-')) {
      exp_negative = exp_part.front() == '-';
      exp_part.remove_prefix(1);
    }
    if (!all_digits(exp_part) || exp_part.size() > 6) bad(text);
    exponent = std::stol(std::string(exp_part));
    if (exp_negative) exponent = -exponent;
    s = s.substr(0, e);
  }

  std::string_view int_part = s;
  std::string_view frac_part;
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    int_part = s.substr(0, dot);
    frac_part = s.substr(dot + 1);
  }
  if (int_part.empty() && frac_part.empty()) bad(text);
  if (!int_part.empty() && !all_digits(int_part)) bad(text);
  if (!frac_part.empty() && !all_digits(frac_part)) bad(text);

  std::string digits = std::string(int_part) + std::string(frac_part);
  if (digits.empty()) bad(text);
  mpz_class mantissa(digits, 10);
  exponent -= static_cast<long>(frac_part.size());

  Rational r(mantissa);
  if (exponent > 0) {
    r *= pow10(static_cast<unsigned long>(exponent));
  } else if (exponent < 0) {
    r /= pow10(static_cast<unsigned long>(-exponent));
  }
  r.canonicalize();
  return negative ? Rational(-r) : r;
}

Rational rational_from_double(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("non-finite value");
  Rational r(value);
  r.canonicalize();
  return r;
}

double to_double(const Rational& value) { return value.get_d(); }

std::string to_exact_string(const Rational& value) {
  mpz_class den = value.get_den();
  if (den == 1) return value.get_num().get_str();

  // Terminating decimal iff the reduced denominator is 2^a * 5^b.
  mpz_class rest = den;
  unsigned long twos = mpz_remove(rest.get_mpz_t(), rest.get_mpz_t(), mpz_class(2).get_mpz_t());
  unsigned long fives = mpz_remove(rest.get_mpz_t(), rest.get_mpz_t(), mpz_class(5).get_mpz_t());
  if (rest != 1) return value.get_str();

  unsigned long places = std::max(twos, fives);
  mpz_class scaled = value.get_num() * pow10(places) / den;
  bool negative = scaled < 0;
  if (negative) scaled = -scaled;
  std::string digits = scaled.get_str();
  if (digits.size() <= places) digits.insert(0, places - digits.size() + 1, '0');
  digits.insert(digits.size() - places, ".");
  return negative ? "-" + digits : digits;
}

mpz_class floor_of(const Rational& value) {
  mpz_class r;
  mpz_fdiv_q(r.get_mpz_t(), value.get_num_mpz_t(), value.get_den_mpz_t());
  return r;
}

bool is_integer(const Rational& value) { return value.get_den() == 1; }

Rational lcm(const Rational& a, const Rational& b) {
  if (a <= 0 || b <= 0) throw std::invalid_argument("lcm requires positive operands");
  // lcm(p/q, r/s) = lcm(p*s, r*q) / (q*s), with reduced operands.
  mpz_class ps = a.get_num() * b.get_den();
  mpz_class rq = b.get_num() * a.get_den();
  mpz_class l;
  mpz_lcm(l.get_mpz_t(), ps.get_mpz_t(), rq.get_mpz_t());
  Rational r(l, a.get_den() * b.get_den());
  r.canonicalize();
  return r;
}

}  // namespace tsnwcd
