#include "tsnwcd/minplus.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace tsnwcd::minplus {

namespace {

// A linear piece valid on [lo, hi]; hi empty means unbounded.
struct Piece {
  Rational lo;
  std::optional<Rational> hi;
  Rational value_at_lo;
  Rational slope;

  Rational at(const Rational& t) const { return value_at_lo + slope * (t - lo); }
  bool covers(const Rational& a, const std::optional<Rational>& b) const {
    if (lo > a) return false;
    if (!hi) return true;
    return b && *hi >= *b;
  }
};

void add_piece(std::vector<Piece>& out, Rational lo, std::optional<Rational> hi, Rational value_at_lo,
               Rational slope) {
  // Clip to t >= 0.
  if (hi && *hi <= 0) return;
  if (lo < 0) {
    value_at_lo += slope * (Rational(0) - lo);
    lo = 0;
  }
  if (hi && *hi <= lo) return;
  out.push_back({std::move(lo), std::move(hi), std::move(value_at_lo), std::move(slope)});
}

void curve_pieces(const Curve& f, std::vector<Piece>& out) {
  const auto& s = f.segments();
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::optional<Rational> hi;
    if (i + 1 < s.size()) hi = s[i + 1].start;
    add_piece(out, s[i].start, hi, s[i].value, s[i].slope);
  }
}

// Pointwise lower (upper) envelope of pieces on (0, inf). The pieces must
// cover every t > 0 and their envelope must be continuous there.
Curve envelope(const std::vector<Piece>& pieces, bool lower) {
  std::vector<Rational> xs{Rational(0)};
  for (const auto& p : pieces) {
    xs.push_back(p.lo);
    if (p.hi) xs.push_back(*p.hi);
  }
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    for (std::size_t j = i + 1; j < pieces.size(); ++j) {
      const Piece& a = pieces[i];
      const Piece& b = pieces[j];
      if (a.slope == b.slope) continue;
      // a.at(t) == b.at(t)
      Rational t = (b.value_at_lo - b.slope * b.lo - a.value_at_lo + a.slope * a.lo) / (a.slope - b.slope);
      if (t <= 0) continue;
      if (t < a.lo || t < b.lo) continue;
      if ((a.hi && t > *a.hi) || (b.hi && t > *b.hi)) continue;
      xs.push_back(t);
    }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  std::vector<Segment> segs;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Rational& a = xs[k];
    std::optional<Rational> b;
    if (k + 1 < xs.size()) b = xs[k + 1];
    Rational probe = b ? Rational((a + *b) / 2) : Rational(a + 1);
    const Piece* best = nullptr;
    Rational best_value;
    for (const auto& p : pieces) {
      if (!p.covers(a, b)) continue;
      Rational v = p.at(probe);
      bool better = !best || (lower ? v < best_value : v > best_value);
      if (better) {
        best = &p;
        best_value = std::move(v);
      }
    }
    if (!best) throw std::logic_error("envelope: pieces do not cover (0, inf)");
    segs.push_back({a, best->at(a), best->slope});
  }
  return Curve(std::move(segs));
}

Rational max_r(const Rational& a, const Rational& b) { return a < b ? b : a; }

}  // namespace

Curve::Curve() : segments_{{Rational(0), Rational(0), Rational(0)}} {}

Curve::Curve(std::vector<Segment> segments) : segments_(std::move(segments)) {
  if (segments_.empty()) throw std::invalid_argument("curve needs at least one segment");
  if (segments_.front().start != 0) throw std::invalid_argument("first segment must start at 0");
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    const Segment& prev = segments_[i - 1];
    const Segment& cur = segments_[i];
    if (cur.start <= prev.start) throw std::invalid_argument("segment starts must increase");
    if (prev.value + prev.slope * (cur.start - prev.start) != cur.value) {
      throw std::invalid_argument("curve must be continuous on (0, inf)");
    }
  }
  normalize();
}

void Curve::normalize() {
  std::vector<Segment> out;
  out.reserve(segments_.size());
  for (auto& s : segments_) {
    if (!out.empty() && out.back().slope == s.slope) continue;
    out.push_back(std::move(s));
  }
  segments_ = std::move(out);
}

Curve Curve::affine(Rational burst, Rational rate) {
  return Curve({{Rational(0), std::move(burst), std::move(rate)}});
}

Curve Curve::rate_latency(Rational rate, Rational latency) {
  if (latency < 0) throw std::invalid_argument("latency must be >= 0");
  if (latency == 0) return Curve({{Rational(0), Rational(0), std::move(rate)}});
  return Curve({{Rational(0), Rational(0), Rational(0)}, {std::move(latency), Rational(0), std::move(rate)}});
}

Rational Curve::operator()(const Rational& t) const {
  if (t <= 0) return Rational(0);
  auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                             [](const Segment& s, const Rational& x) { return s.start < x; });
  const Segment& s = *std::prev(it);
  return s.value + s.slope * (t - s.start);
}

bool Curve::nondecreasing_nonneg() const {
  if (segments_.front().value < 0) return false;
  return std::all_of(segments_.begin(), segments_.end(), [](const Segment& s) { return s.slope >= 0; });
}

std::ostream& operator<<(std::ostream& os, const Curve& c) {
  os << "Curve[";
  bool first = true;
  for (const auto& s : c.segments()) {
    if (!first) os << ", ";
    first = false;
    os << "(" << to_exact_string(s.start) << ", " << to_exact_string(s.value) << ", " << to_exact_string(s.slope)
       << ")";
  }
  return os << "]";
}

std::string to_csv(const Curve& c) {
  std::ostringstream os;
  os << "t_us,value_bits\n";
  os << "0,0\n";
  for (const auto& s : c.segments()) os << to_exact_string(s.start) << "," << to_exact_string(s.value) << "\n";
  const Segment& last = c.segments().back();
  Rational tail = last.start + 1;
  os << to_exact_string(tail) << "," << to_exact_string(c(tail)) << "\n";
  return os.str();
}

Curve min_of(const Curve& f, const Curve& g) {
  std::vector<Piece> pieces;
  curve_pieces(f, pieces);
  curve_pieces(g, pieces);
  return envelope(pieces, true);
}

Curve max_of(const Curve& f, const Curve& g) {
  std::vector<Piece> pieces;
  curve_pieces(f, pieces);
  curve_pieces(g, pieces);
  return envelope(pieces, false);
}

Curve sum_of(const Curve& f, const Curve& g) {
  std::vector<Rational> xs;
  for (const auto& s : f.segments()) xs.push_back(s.start);
  for (const auto& s : g.segments()) xs.push_back(s.start);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  auto slope_at = [](const Curve& c, const Rational& x) {
    auto it = std::upper_bound(c.segments().begin(), c.segments().end(), x,
                               [](const Rational& v, const Segment& s) { return v < s.start; });
    return std::prev(it)->slope;
  };
  std::vector<Segment> segs;
  for (const auto& x : xs) {
    Rational v = x == 0 ? Rational(f.burst() + g.burst()) : Rational(f(x) + g(x));
    segs.push_back({x, v, slope_at(f, x) + slope_at(g, x)});
  }
  return Curve(std::move(segs));
}

Curve shift_delay(const Curve& f, const Rational& delay) {
  if (delay < 0) throw std::invalid_argument("delay must be >= 0");
  if (delay == 0) return f;
  std::vector<Segment> segs;
  const auto& s = f.segments();
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool last = i + 1 == s.size();
    if (s[i].start >= delay) {
      segs.push_back({s[i].start - delay, s[i].value, s[i].slope});
    } else if (last || s[i + 1].start > delay) {
      segs.push_back({Rational(0), f(delay), s[i].slope});
    }
  }
  return Curve(std::move(segs));
}

Curve convolve(const Curve& f, const Curve& g) {
  std::vector<Piece> pieces;
  curve_pieces(f, pieces);
  curve_pieces(g, pieces);
  const auto& fs = f.segments();
  const auto& gs = g.segments();
  for (std::size_t i = 0; i < fs.size(); ++i) {
    std::optional<Rational> flen;
    if (i + 1 < fs.size()) flen = fs[i + 1].start - fs[i].start;
    for (std::size_t j = 0; j < gs.size(); ++j) {
      std::optional<Rational> glen;
      if (j + 1 < gs.size()) glen = gs[j + 1].start - gs[j].start;
      // Convolution of two linear pieces: the smaller slope is used first.
      bool f_first = fs[i].slope <= gs[j].slope;
      const Rational& s1 = f_first ? fs[i].slope : gs[j].slope;
      const Rational& s2 = f_first ? gs[j].slope : fs[i].slope;
      const auto& len1 = f_first ? flen : glen;
      const auto& len2 = f_first ? glen : flen;
      Rational t0 = fs[i].start + gs[j].start;
      Rational v0 = fs[i].value + gs[j].value;
      if (!len1) {
        add_piece(pieces, t0, std::nullopt, v0, s1);
        continue;
      }
      Rational t1 = t0 + *len1;
      add_piece(pieces, t0, t1, v0, s1);
      Rational v1 = v0 + s1 * *len1;
      std::optional<Rational> t2;
      if (len2) t2 = t1 + *len2;
      add_piece(pieces, t1, t2, v1, s2);
    }
  }
  return envelope(pieces, true);
}

Curve convolve(const Curve& f, const PureDelay& d) {
  if (d.delay_us < 0) throw std::invalid_argument("delay must be >= 0");
  if (d.delay_us == 0) return f;
  if (f.burst() != 0) throw std::invalid_argument("convolution with a pure delay of a bursty curve is not continuous");
  std::vector<Segment> segs{{Rational(0), Rational(0), Rational(0)}};
  for (const auto& s : f.segments()) segs.push_back({s.start + d.delay_us, s.value, s.slope});
  return Curve(std::move(segs));
}

Curve deconvolve(const Curve& f, const Curve& g) {
  if (f.final_slope() > g.final_slope()) {
    throw DivergenceError("deconvolution diverges: long-term rate " + to_exact_string(f.final_slope()) +
                          " exceeds " + to_exact_string(g.final_slope()));
  }
  std::vector<Piece> pieces;
  curve_pieces(f, pieces);
  const auto& fs = f.segments();
  const auto& gs = g.segments();
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const Rational& a = fs[i].start;
    std::optional<Rational> b;
    if (i + 1 < fs.size()) b = fs[i + 1].start;
    const Rational& p = fs[i].slope;
    for (std::size_t j = 0; j < gs.size(); ++j) {
      const Rational& c = gs[j].start;
      std::optional<Rational> d;
      if (j + 1 < gs.size()) d = gs[j + 1].start;
      const Rational& q = gs[j].slope;
      // value(t, s) = K + p t + (p - q) s, s in [max(c, a - t), min(d, b - t)].
      Rational k = fs[i].value - gs[j].value - p * a + q * c;
      auto line = [&](const Rational& lo, std::optional<Rational> hi, const Rational& offset, const Rational& slope) {
        add_piece(pieces, lo, std::move(hi), offset + slope * lo, slope);
      };
      if (p > q) {
        if (!d && !b) throw std::logic_error("deconvolve: divergent pair");
        if (!d) {
          // s = b - t on t <= b - c.
          line(Rational(0), Rational(*b - c), k + (p - q) * *b, q);
        } else if (!b) {
          line(a - *d, std::nullopt, k + (p - q) * *d, p);
        } else {
          line(a - *d, Rational(*b - *d), k + (p - q) * *d, p);
          line(*b - *d, Rational(*b - c), k + (p - q) * *b, q);
        }
      } else {
        // s = a - t for t <= a - c, then s = c.
        if (d) {
          line(a - *d, Rational(a - c), k + (p - q) * a, q);
        } else if (a - c > 0) {
          line(Rational(0), Rational(a - c), k + (p - q) * a, q);
        }
        std::optional<Rational> hi;
        if (b) hi = *b - c;
        line(a - c, hi, k + (p - q) * c, p);
      }
    }
  }
  return envelope(pieces, false);
}

Curve deconvolve(const Curve& f, const PureDelay& d) { return shift_delay(f, d.delay_us); }

namespace {

// inf{u >= 0 | beta(u) >= y}, empty when never reached.
std::optional<Rational> lower_inverse(const Curve& beta, const Rational& y) {
  if (y <= 0 || y <= beta.burst()) return Rational(0);
  const auto& s = beta.segments();
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool last = i + 1 == s.size();
    if (s[i].value >= y) return s[i].start;
    if (s[i].slope <= 0) continue;
    if (last || s[i + 1].value >= y) return s[i].start + (y - s[i].value) / s[i].slope;
  }
  return std::nullopt;
}

// inf{u >= 0 | beta(u) > y}, empty when never exceeded.
std::optional<Rational> strict_inverse(const Curve& beta, const Rational& y) {
  if (y < 0 || y < beta.burst()) return Rational(0);
  const auto& s = beta.segments();
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool last = i + 1 == s.size();
    if (s[i].value > y) return s[i].start;
    if (s[i].slope <= 0) continue;
    if (last || s[i + 1].value > y) return s[i].start + (y - s[i].value) / s[i].slope;
  }
  return std::nullopt;
}

Rational slope_right_of(const Curve& c, const Rational& t) {
  auto it = std::upper_bound(c.segments().begin(), c.segments().end(), t,
                             [](const Rational& v, const Segment& s) { return v < s.start; });
  return std::prev(it)->slope;
}

}  // namespace

Rational h_dev(const Curve& alpha, const Curve& beta) {
  const Rational& pa = alpha.final_slope();
  const Rational& pb = beta.final_slope();
  auto unstable = [&] {
    return InstabilityError("horizontal deviation is unbounded: arrival rate " + to_exact_string(pa) +
                            " vs service rate " + to_exact_string(pb));
  };
  if (pa > pb) throw unstable();
  if (pb == 0) {
    Rational alpha_end = alpha(alpha.last_breakpoint() + 1);
    Rational beta_end = beta(beta.last_breakpoint() + 1);
    if (alpha_end > beta_end) throw unstable();
  }

  std::vector<Rational> candidates;
  for (const auto& s : alpha.segments()) {
    if (s.start > 0) candidates.push_back(s.start);
  }
  std::vector<Rational> levels{beta.burst()};
  for (const auto& s : beta.segments()) levels.push_back(s.value);
  const auto& as = alpha.segments();
  for (const auto& v : levels) {
    for (std::size_t i = 0; i < as.size(); ++i) {
      if (as[i].slope <= 0) continue;
      Rational t = as[i].start + (v - as[i].value) / as[i].slope;
      if (t <= as[i].start) continue;
      if (i + 1 < as.size() && t > as[i + 1].start) continue;
      candidates.push_back(t);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  auto require = [&](const std::optional<Rational>& u) {
    if (!u) throw unstable();
    return *u;
  };
  Rational best(0);
  // t -> 0+
  {
    Rational a0 = alpha.burst();
    Rational u = as.front().slope > 0 ? require(strict_inverse(beta, a0)) : require(lower_inverse(beta, a0));
    best = max_r(best, u);
  }
  for (const auto& c : candidates) {
    Rational y = alpha(c);
    best = max_r(best, require(lower_inverse(beta, y)) - c);
    if (slope_right_of(alpha, c) > 0) best = max_r(best, require(strict_inverse(beta, y)) - c);
  }
  return best;
}

Curve nondecreasing_nonneg_closure(const Curve& f) {
  std::vector<Segment> segs;
  const auto& s = f.segments();
  Rational m(0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool last = i + 1 == s.size();
    const Segment& seg = s[i];
    Rational end_value = last ? Rational(0) : s[i + 1].value;
    if (seg.slope > 0) {
      if (seg.value >= m) {
        segs.push_back(seg);
      } else {
        segs.push_back({seg.start, m, Rational(0)});
        Rational cross = seg.start + (m - seg.value) / seg.slope;
        if (last || cross < s[i + 1].start) segs.push_back({cross, m, seg.slope});
      }
      if (!last) m = max_r(m, end_value);
    } else {
      m = max_r(m, seg.value);
      segs.push_back({seg.start, m, Rational(0)});
    }
  }
  return Curve(std::move(segs));
}

}  // namespace tsnwcd::minplus
