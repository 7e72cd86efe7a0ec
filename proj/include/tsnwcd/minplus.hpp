#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tsnwcd/error.hpp"
#include "tsnwcd/rational.hpp"

// Exact min-plus algebra over piecewise-linear curves.
//
// A Curve f is defined on t >= 0 with f(0) = 0. On (0, inf) it is continuous
// and piecewise linear; the only discontinuity allowed is the jump at 0+
// (the burst of an arrival curve). The last segment extends to infinity.
namespace tsnwcd::minplus {

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class InstabilityError : public Error {
 public:
  using Error::Error;
};

struct Segment {
  Rational start;
  Rational value;  // right limit at `start`
  Rational slope;

  bool operator==(const Segment&) const = default;
};

class Curve {
 public:
  // The zero curve.
  Curve();
  // Segments must start at 0 with strictly increasing starts, and be
  // continuous at every start > 0. Throws std::invalid_argument otherwise.
  explicit Curve(std::vector<Segment> segments);

  static Curve zero() { return Curve(); }
  // 0 at t = 0, burst + rate * t for t > 0.
  static Curve affine(Rational burst, Rational rate);
  // rate * max(t - latency, 0).
  static Curve rate_latency(Rational rate, Rational latency);

  const std::vector<Segment>& segments() const { return segments_; }
  Rational operator()(const Rational& t) const;
  Rational burst() const { return segments_.front().value; }
  const Rational& final_slope() const { return segments_.back().slope; }
  const Rational& last_breakpoint() const { return segments_.back().start; }

  // Non-negative and wide-sense increasing.
  bool nondecreasing_nonneg() const;

  bool operator==(const Curve&) const = default;

 private:
  void normalize();
  std::vector<Segment> segments_;
};

std::ostream& operator<<(std::ostream& os, const Curve& c);
// (t, value) rows at every breakpoint, plus a trailing point past the last one.
std::string to_csv(const Curve& c);

struct TokenBucket {
  Rational burst_bits;
  Rational rate_bits_per_us;

  Curve curve() const { return Curve::affine(burst_bits, rate_bits_per_us); }
  bool operator==(const TokenBucket&) const = default;
};

struct RateLatency {
  Rational rate_bits_per_us;
  Rational latency_us;

  Curve curve() const { return Curve::rate_latency(rate_bits_per_us, latency_us); }
  bool operator==(const RateLatency&) const = default;
};

// delta_D: 0 on [0, D], +inf afterwards. delta_0 is the neutral element of
// convolution; it has no finite Curve representation.
struct PureDelay {
  Rational delay_us;
};

// inf over 0 <= s <= t of f(t - s) + g(s).
Curve convolve(const Curve& f, const Curve& g);
Curve convolve(const Curve& f, const PureDelay& d);

// sup over s >= 0 of f(t + s) - g(s). Throws DivergenceError when the long
// term rate of f exceeds the one of g.
Curve deconvolve(const Curve& f, const Curve& g);
Curve deconvolve(const Curve& f, const PureDelay& d);

// Horizontal deviation: sup over t of inf{tau >= 0 | alpha(t) <= beta(t + tau)}.
// Throws InstabilityError when the deviation is unbounded.
Rational h_dev(const Curve& alpha, const Curve& beta);

// t -> f(t + delay), i.e. f deconvolved by delta_delay.
Curve shift_delay(const Curve& f, const Rational& delay);

Curve min_of(const Curve& f, const Curve& g);
Curve max_of(const Curve& f, const Curve& g);
Curve sum_of(const Curve& f, const Curve& g);
// Smallest wide-sense increasing non-negative curve above max(f, 0).
Curve nondecreasing_nonneg_closure(const Curve& f);

}  // namespace tsnwcd::minplus
