#pragma once

// Independent double-precision reference for min-plus curves. It shares no
// code with the library: curves are plain breakpoint lists and every
// operator is evaluated by brute-force search over candidate points.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tsnwcd/minplus.hpp"

namespace oracle {

struct Pwl {
  // value(0) = 0; for t > 0 value = v[i] + k[i] * (t - x[i]) with x[i] < t
  // (x[0] = 0 keeps v[0] as the right limit at 0).
  std::vector<double> x, v, k;

  double operator()(double t) const {
    if (t <= 0) return 0;
    std::size_t i = 0;
    while (i + 1 < x.size() && x[i + 1] < t) ++i;
    return v[i] + k[i] * (t - x[i]);
  }
  double right(double t) const {
    if (t < 0) return 0;
    if (t == 0) return v[0];
    return (*this)(t);
  }
};

inline Pwl from(const tsnwcd::minplus::Curve& c) {
  Pwl p;
  for (const auto& s : c.segments()) {
    p.x.push_back(s.start.get_d());
    p.v.push_back(s.value.get_d());
    p.k.push_back(s.slope.get_d());
  }
  return p;
}

inline std::vector<double> s_candidates(double t, const Pwl& f, const Pwl& g, int grid) {
  std::vector<double> s{0.0, t};
  for (double b : g.x)
    if (b >= 0 && b <= t) s.push_back(b);
  for (double b : f.x)
    if (t - b >= 0 && t - b <= t) s.push_back(t - b);
  for (int i = 1; i < grid; ++i) s.push_back(t * i / grid);
  return s;
}

// inf over 0 <= s <= t of f(t - s) + g(s); endpoints use both the point value
// and the one-sided limit so the jump at 0+ is handled.
inline double convolve(const Pwl& f, const Pwl& g, double t, int grid = 64) {
  if (t <= 0) return 0;
  double best = std::numeric_limits<double>::infinity();
  for (double s : s_candidates(t, f, g, grid)) {
    double a = f(t - s), b = g(s);
    best = std::min(best, a + b);
    if (s == 0) best = std::min(best, f(t) + g.right(0));
    if (s == t) best = std::min(best, f.right(0) + g(t));
  }
  return best;
}

// sup over s >= 0 of f(t + s) - g(s), searched up to `reach`.
inline double deconvolve(const Pwl& f, const Pwl& g, double t, double reach, int grid = 256) {
  if (t <= 0) return 0;
  std::vector<double> s{0.0, reach};
  for (double b : g.x) s.push_back(b);
  for (double b : f.x)
    if (b - t >= 0) s.push_back(b - t);
  for (int i = 1; i < grid; ++i) s.push_back(reach * i / grid);
  double best = -std::numeric_limits<double>::infinity();
  for (double x : s) {
    best = std::max(best, f(t + x) - g(x));
    if (x == 0) best = std::max(best, f(t) - g.right(0));
  }
  return best;
}

// inf{u >= 0 | beta(u) >= y} by bisection on a nondecreasing beta.
inline double inverse(const Pwl& beta, double y, double hi) {
  if (y <= 0 || beta.right(0) >= y) return 0;
  double lo = 0;
  while (beta(hi) < y) hi *= 2;
  for (int i = 0; i < 200; ++i) {
    double mid = (lo + hi) / 2;
    if (beta(mid) >= y)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

inline double h_dev(const Pwl& alpha, const Pwl& beta, double span, int grid = 10000) {
  std::vector<double> ts;
  const double eps = 1e-12;
  ts.push_back(eps);
  for (double b : alpha.x) {
    ts.push_back(b);
    ts.push_back(b + eps);
  }
  // Points where alpha reaches a breakpoint level of beta.
  for (double level : beta.v) {
    for (int i = 0; i <= grid; ++i) {
      double t = span * i / grid;
      if (alpha(t) >= level) {
        double lo = i ? span * (i - 1) / grid : 0, hi = t;
        for (int j = 0; j < 200; ++j) {
          double mid = (lo + hi) / 2;
          (alpha(mid) >= level ? hi : lo) = mid;
        }
        ts.push_back(hi);
        ts.push_back(hi + eps);
        break;
      }
    }
  }
  for (int i = 1; i <= grid; ++i) ts.push_back(span * i / grid);
  double best = 0;
  for (double t : ts) best = std::max(best, inverse(beta, alpha(t), span + 1) - t);
  return best;
}

inline bool close(double a, double b, double rel = 1e-9) {
  return std::fabs(a - b) <= rel * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

}  // namespace oracle
