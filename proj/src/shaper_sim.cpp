#include "tsnwcd/shaper_sim.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <set>
#include <sstream>

#include "tsnwcd/random.hpp"

namespace tsnwcd::sim {

std::string_view to_string(ReleasePolicy policy) {
  return policy == ReleasePolicy::kSynchronized ? "synchronized" : "jittered";
}

ReleasePolicy parse_release_policy(std::string_view text) {
  if (text == "synchronized") return ReleasePolicy::kSynchronized;
  if (text == "jittered") return ReleasePolicy::kJittered;
  throw Error("unknown release policy '" + std::string(text) + "'");
}

namespace {

struct Frame {
  FlowId flow = 0;
  long seq = 0;
  Rational bits;
  std::size_t hop = 0;
  bool background = false;
  std::size_t class_index = 0;
};

// One egress port: strict priority across classes, CBS credit on classes
// that have an idle slope.
class EgressPort {
 public:
  struct Class {
    std::optional<Rational> idle;
    Rational send;
    std::deque<Frame> queue;
    Rational credit;
    bool saturating = false;
    Rational saturating_bits;
    bool trace = false;
    std::vector<TracePoint> trace_points;
    Rational credit_min;
    Rational credit_max;
  };

  EgressPort(Rational rate, std::vector<Class> classes) : rate_(std::move(rate)), classes_(std::move(classes)) {
    for (auto& c : classes_) {
      if (c.idle) c.send = *c.idle - rate_;
      record(c, Rational(0));
    }
  }

  bool busy() const { return tx_.has_value(); }
  const Rational& rate() const { return rate_; }
  const Class& cls(std::size_t i) const { return classes_[i]; }
  std::uint64_t generation = 0;

  void advance(const Rational& t) {
    if (t <= last_) return;
    Rational dt = t - last_;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      Class& c = classes_[i];
      if (!c.idle) continue;
      bool waiting = c.saturating || !c.queue.empty();
      if (tx_ == i) {
        c.credit += c.send * dt;
      } else if (waiting) {
        c.credit += *c.idle * dt;
      } else if (c.credit < 0) {
        Rational reach = c.credit + *c.idle * dt;
        if (reach >= 0) {
          if (c.trace) c.trace_points.push_back({last_ - c.credit / *c.idle, Rational(0)});
          c.credit = 0;
        } else {
          c.credit = reach;
        }
      } else {
        c.credit = 0;
      }
      record(c, t);
    }
    last_ = t;
  }

  void enqueue(std::size_t cls, Frame f, const Rational& t) {
    advance(t);
    classes_[cls].queue.push_back(std::move(f));
  }

  std::optional<std::size_t> select() const {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      const Class& c = classes_[i];
      if (!c.saturating && c.queue.empty()) continue;
      if (c.idle && c.credit < 0) continue;
      return i;
    }
    return std::nullopt;
  }

  // Starts sending the head frame of `cls`; returns it and its end time.
  std::pair<Frame, Rational> start(std::size_t cls, const Rational& t) {
    advance(t);
    Class& c = classes_[cls];
    Frame f;
    if (!c.queue.empty()) {
      f = std::move(c.queue.front());
      c.queue.pop_front();
    } else {
      f.background = true;
      f.bits = c.saturating_bits;
    }
    tx_ = cls;
    Rational end = t + f.bits / rate_;
    return {std::move(f), std::move(end)};
  }

  void finish(const Rational& t) {
    advance(t);
    Class& c = classes_[*tx_];
    tx_.reset();
    if (c.idle && !c.saturating && c.queue.empty() && c.credit > 0) {
      c.credit = 0;
      record(c, t);
    }
  }

  // Earliest time a backlogged class with negative credit becomes eligible.
  std::optional<Rational> next_ready(const Rational& t) const {
    std::optional<Rational> best;
    for (const auto& c : classes_) {
      if (!c.idle || c.credit >= 0) continue;
      if (!c.saturating && c.queue.empty()) continue;
      Rational at = t - c.credit / *c.idle;
      if (!best || at < *best) best = at;
    }
    return best;
  }

  // Runs an idle port forward until every negative credit is back at 0.
  void settle() {
    if (busy()) return;
    Rational until = last_;
    for (const auto& c : classes_) {
      if (c.saturating || !c.queue.empty()) return;
      if (c.idle && c.credit < 0) until = std::max(until, Rational(last_ - c.credit / *c.idle));
    }
    advance(until);
  }

  std::vector<Class>& classes() { return classes_; }

 private:
  void record(Class& c, const Rational& t) {
    if (!c.idle) return;
    if (c.credit < c.credit_min) c.credit_min = c.credit;
    if (c.credit > c.credit_max) c.credit_max = c.credit;
    if (c.trace) c.trace_points.push_back({t, c.credit});
  }

  Rational rate_;
  std::vector<Class> classes_;
  std::optional<std::size_t> tx_;
  Rational last_{0};
};

enum Kind : int { kArrive = 0, kComplete = 1, kWake = 2 };

struct Event {
  Rational time;
  int kind = kArrive;
  FlowId flow = 0;
  long seq = 0;
  int port = -1;  // -1 with kArrive means delivery at the destination
  std::uint64_t generation = 0;
  Frame frame;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    if (a.flow != b.flow) return a.flow > b.flow;
    if (a.seq != b.seq) return a.seq > b.seq;
    return a.port > b.port;
  }
};

using EventQueue = std::priority_queue<Event, std::vector<Event>, Later>;

// Routes, per-port indices and release schedule shared by both simulators.
struct Network {
  const net::TestCase* tc = nullptr;
  std::vector<Port> ports;
  std::map<Port, int> index;
  std::map<FlowId, std::vector<int>> route_ports;
  std::map<FlowId, Rational> frame_bits;
  std::map<FlowId, Rational> phase;
  std::map<FlowId, std::vector<Rational>> releases;
  long total_frames = 0;

  Rational propagation(int port) const {
    const Port& p = ports[port];
    return tc->topology.link(p.node, p.next).propagation_us;
  }
};

Network build_network(const net::TestCase& tc, const SimConfig& cfg, const std::optional<Rational>& quantum) {
  auto diagnostics = net::validate_testcase(tc);
  if (!diagnostics.empty()) {
    throw Error("invalid test case " + tc.name + ": " + diagnostics.front().invariant + " (" +
                diagnostics.front().entity + "): " + diagnostics.front().message);
  }
  Rational max_period(0);
  for (const auto& f : tc.flows) max_period = std::max(max_period, f.period_us);
  if (cfg.horizon_us < max_period * 10) {
    throw Error("horizon " + to_exact_string(cfg.horizon_us) + " us is shorter than 10x the largest period");
  }
  Network n;
  n.tc = &tc;
  std::set<Port> all;
  for (const auto& r : tc.routes)
    for (const auto& p : r.ports()) all.insert(p);
  for (const auto& p : all) {
    n.index[p] = static_cast<int>(n.ports.size());
    n.ports.push_back(p);
  }
  std::vector<const net::Flow*> flows;
  for (const auto& f : tc.flows) flows.push_back(&f);
  std::sort(flows.begin(), flows.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
  Rng rng(cfg.seed);
  for (const auto* f : flows) {
    Rational phase(0);
    if (cfg.release_policy == ReleasePolicy::kSynchronized) {
      auto it = tc.constants.offsets_us.find(f->id);
      if (it != tc.constants.offsets_us.end()) phase = it->second;
    } else if (quantum) {
      long slots = floor_of(f->period_us / *quantum).get_si();
      phase = *quantum * static_cast<long>(rng.uniform(0, std::max(0L, slots - 1)));
    } else {
      // Nanosecond granularity.
      long ns = floor_of(f->period_us * 1000).get_si();
      phase = ratio(rng.uniform(0, std::max(0L, ns - 1)), 1000);
    }
    n.phase[f->id] = phase;
    n.frame_bits[f->id] = tc.constants.frame_bits(f->payload_bytes);
    auto& rel = n.releases[f->id];
    for (Rational t = phase; t < cfg.horizon_us; t += f->period_us) rel.push_back(t);
    n.total_frames += static_cast<long>(rel.size());
  }
  for (const auto& r : tc.routes) {
    auto& seq = n.route_ports[r.flow_id];
    for (const auto& p : r.ports()) seq.push_back(n.index.at(p));
  }
  return n;
}

SimReport empty_report(const net::TestCase& tc, const Network& n) {
  SimReport report;
  report.testcase = tc.name;
  report.mechanism = tc.mechanism;
  report.phase_us = n.phase;
  for (const auto& [id, rel] : n.releases) {
    report.frame_count[id] = 0;
    report.max_delay_us[id] = 0;
  }
  return report;
}

void deliver(SimReport& report, const Network& n, const Event& e, long& delivered) {
  Rational delay = e.time - n.releases.at(e.flow)[e.seq];
  Rational& best = report.max_delay_us[e.flow];
  if (delay > best) best = delay;
  ++report.frame_count[e.flow];
  ++delivered;
}

void check_cap(const Rational& t, const SimConfig& cfg, long delivered, long total) {
  if (t >= cfg.horizon_us * 2 && delivered < total) {
    throw HorizonTooShortError("undelivered frames at 2x horizon (" + std::to_string(total - delivered) +
                               " of " + std::to_string(total) + ")");
  }
}

}  // namespace

SimReport simulate_cbs(const net::TestCase& tc, const SimConfig& cfg) {
  if (tc.mechanism != net::Mechanism::kCbs) throw Error("simulate_cbs requires a CBS test case");
  Network n = build_network(tc, cfg, std::nullopt);
  const auto& k = tc.constants;
  SimReport report = empty_report(tc, n);

  std::vector<EgressPort> ports;
  ports.reserve(n.ports.size());
  for (const auto& p : n.ports) {
    EgressPort::Class avb;
    avb.idle = k.idle_slope_bits_per_us();
    avb.trace = cfg.trace_port && *cfg.trace_port == p;
    EgressPort::Class be;
    be.saturating = cfg.best_effort && k.best_effort_max_payload_bytes > 0;
    be.saturating_bits = k.frame_bits(k.best_effort_max_payload_bytes);
    ports.emplace_back(tc.topology.link(p.node, p.next).rate_bits_per_us,
                       std::vector<EgressPort::Class>{std::move(avb), std::move(be)});
  }

  EventQueue events;
  for (const auto& [id, rel] : n.releases) {
    for (std::size_t m = 0; m < rel.size(); ++m) {
      Frame f{id, static_cast<long>(m), n.frame_bits.at(id), 0, false};
      events.push({rel[m], kArrive, id, static_cast<long>(m), n.route_ports.at(id)[0], 0, f});
    }
  }
  if (cfg.best_effort) {
    for (int p = 0; p < static_cast<int>(ports.size()); ++p) events.push({Rational(0), kWake, 0, 0, p, 0, {}});
  }

  auto try_start = [&](int p, const Rational& t) {
    EgressPort& port = ports[p];
    if (port.busy()) return;
    port.advance(t);
    auto sel = port.select();
    if (!sel) {
      if (auto ready = port.next_ready(t)) {
        ++port.generation;
        events.push({*ready, kWake, 0, 0, p, port.generation, {}});
      }
      return;
    }
    auto [frame, end] = port.start(*sel, t);
    events.push({end, kComplete, frame.flow, frame.seq, p, 0, {}});
    if (frame.background) return;
    const auto& seq = n.route_ports.at(frame.flow);
    Rational prop = n.propagation(p);
    if (frame.hop + 1 < seq.size()) {
      Rational at = (k.cut_through ? t : end) + prop + k.switching_us;
      Frame next = frame;
      ++next.hop;
      events.push({at, kArrive, frame.flow, frame.seq, seq[frame.hop + 1], 0, next});
    } else {
      events.push({end + prop, kArrive, frame.flow, frame.seq, -1, 0, {}});
    }
  };

  long delivered = 0;
  while (!events.empty() && delivered < n.total_frames) {
    Rational t = events.top().time;
    check_cap(t, cfg, delivered, n.total_frames);
    std::set<int> touched;
    while (!events.empty() && events.top().time == t) {
      Event e = events.top();
      events.pop();
      switch (e.kind) {
        case kArrive:
          if (e.port < 0) {
            deliver(report, n, e, delivered);
          } else {
            ports[e.port].enqueue(0, std::move(e.frame), t);
            touched.insert(e.port);
          }
          break;
        case kComplete:
          ports[e.port].finish(t);
          touched.insert(e.port);
          break;
        case kWake:
          if (e.generation == ports[e.port].generation) touched.insert(e.port);
          break;
      }
    }
    for (int p : touched) try_start(p, t);
  }
  if (delivered < n.total_frames) throw HorizonTooShortError("simulation ended with undelivered frames");

  for (std::size_t i = 0; i < ports.size(); ++i) {
    ports[i].settle();
    const auto& c = ports[i].cls(0);
    report.credit_range[n.ports[i]] = {c.credit_min, c.credit_max};
    if (c.trace) report.credit_trace = c.trace_points;
  }
  return report;
}

SimReport simulate_cqf(const net::TestCase& tc, const SimConfig& cfg) {
  if (tc.mechanism != net::Mechanism::kCqf) throw Error("simulate_cqf requires a CQF test case");
  if (!tc.constants.cycle_us || *tc.constants.cycle_us <= 0) throw Error("CQF requires a positive cycle_us");
  const Rational cycle = *tc.constants.cycle_us;
  Network n = build_network(tc, cfg, cycle);
  const auto& k = tc.constants;
  SimReport report = empty_report(tc, n);

  struct Pending {
    Rational arrival;
    Frame frame;
  };
  std::vector<Rational> busy_until(n.ports.size());
  std::vector<std::map<long, std::vector<Pending>>> cycles(n.ports.size());

  EventQueue events;
  for (const auto& [id, rel] : n.releases) {
    for (std::size_t m = 0; m < rel.size(); ++m) {
      Frame f{id, static_cast<long>(m), n.frame_bits.at(id), 0, false};
      events.push({rel[m], kArrive, id, static_cast<long>(m), n.route_ports.at(id)[0], 0, f});
    }
  }

  auto forward = [&](int p, const Frame& frame, const Rational& start, const Rational& end) {
    const auto& seq = n.route_ports.at(frame.flow);
    Rational prop = n.propagation(p);
    if (frame.hop + 1 < seq.size()) {
      Frame next = frame;
      ++next.hop;
      Rational at = (k.cut_through ? start : end) + prop + k.switching_us;
      events.push({at, kArrive, frame.flow, frame.seq, seq[frame.hop + 1], 0, next});
    } else {
      events.push({end + prop, kArrive, frame.flow, frame.seq, -1, 0, {}});
    }
  };

  long delivered = 0;
  while (!events.empty()) {
    Event e = events.top();
    events.pop();
    check_cap(e.time, cfg, delivered, n.total_frames);
    if (e.kind == kArrive && e.port < 0) {
      deliver(report, n, e, delivered);
      continue;
    }
    const Port& port = n.ports[e.port];
    Rational rate = tc.topology.link(port.node, port.next).rate_bits_per_us;
    if (e.kind == kArrive) {
      if (!tc.topology.is_switch(port.node)) {
        // Talker egress is not gated.
        Rational start = std::max(e.time, busy_until[e.port]);
        Rational end = start + e.frame.bits / rate;
        busy_until[e.port] = end;
        forward(e.port, e.frame, start, end);
        continue;
      }
      long c = floor_of(e.time / cycle).get_si();
      auto& bucket = cycles[e.port][c];
      if (bucket.empty()) events.push({cycle * (c + 1), kComplete, 0, c, e.port, 0, {}});
      bucket.push_back({e.time, e.frame});
      continue;
    }
    // Cycle boundary: send what was received during cycle e.seq.
    long c = e.seq;
    auto node = cycles[e.port].extract(c);
    auto& bucket = node.mapped();
    std::sort(bucket.begin(), bucket.end(), [](const Pending& a, const Pending& b) {
      if (a.arrival != b.arrival) return a.arrival < b.arrival;
      if (a.frame.flow != b.frame.flow) return a.frame.flow < b.frame.flow;
      return a.frame.seq < b.frame.seq;
    });
    Rational start = e.time;
    Rational limit = e.time + cycle;
    for (const auto& pending : bucket) {
      Rational end = start + pending.frame.bits / rate;
      if (end > limit) {
        throw CqfCapacityError("queue overflow at " + port.label() + " in cycle " + std::to_string(c + 1) +
                               ": transmissions exceed the cycle of " + to_exact_string(cycle) + " us");
      }
      forward(e.port, pending.frame, start, end);
      start = end;
    }
  }
  if (delivered < n.total_frames) throw HorizonTooShortError("simulation ended with undelivered frames");
  return report;
}

SimReport simulate(const net::TestCase& tc, const SimConfig& cfg) {
  return tc.mechanism == net::Mechanism::kCbs ? simulate_cbs(tc, cfg) : simulate_cqf(tc, cfg);
}

std::vector<TracePoint> credit_trace(const net::TestCase& tc, SimConfig cfg, const Port& port) {
  cfg.trace_port = port;
  return simulate_cbs(tc, cfg).credit_trace;
}

nlohmann::json report_json(const SimReport& report, const SimConfig& cfg) {
  using nlohmann::json;
  json flows = json::array();
  for (const auto& [id, d] : report.max_delay_us) {
    flows.push_back({{"id", id},
                     {"max_delay_us", to_double(d)},
                     {"max_delay_exact", to_exact_string(d)},
                     {"frames", report.frame_count.at(id)},
                     {"phase_us", to_double(report.phase_us.at(id))}});
  }
  json ports = json::array();
  for (const auto& [p, r] : report.credit_range) {
    ports.push_back({{"port", p.label()}, {"credit_min_bits", to_double(r.min)}, {"credit_max_bits", to_double(r.max)}});
  }
  json out = {{"testcase", report.testcase},
              {"mechanism", std::string(report.mechanism == net::Mechanism::kCbs ? "CBS" : "CQF")},
              {"seed", cfg.seed},
              {"horizon_us", to_double(cfg.horizon_us)},
              {"release_policy", std::string(to_string(cfg.release_policy))},
              {"best_effort", cfg.best_effort},
              {"flows", flows}};
  if (report.mechanism == net::Mechanism::kCbs) out["ports"] = ports;
  return out;
}

std::string trace_csv(const std::vector<TracePoint>& trace) {
  std::ostringstream os;
  os << "t_us,credit_bits\n";
  for (const auto& p : trace) os << to_exact_string(p.t_us) << "," << to_exact_string(p.credit_bits) << "\n";
  return os.str();
}

PortReplay simulate_port(const PortScenario& scenario) {
  std::vector<EgressPort::Class> classes;
  for (const auto& c : scenario.classes) {
    EgressPort::Class cls;
    cls.idle = c.idle_slope;
    cls.trace = c.idle_slope.has_value();
    classes.push_back(std::move(cls));
  }
  EgressPort port(scenario.link_rate, std::move(classes));
  EventQueue events;
  for (const auto& f : scenario.frames) {
    if (f.class_index >= scenario.classes.size()) throw std::invalid_argument("frame class out of range");
    Frame frame{f.id, 0, f.bits, 0, false, f.class_index};
    events.push({f.arrival_us, kArrive, f.id, 0, 0, 0, frame});
  }
  PortReplay out;
  while (!events.empty()) {
    Rational t = events.top().time;
    bool touched = false;
    while (!events.empty() && events.top().time == t) {
      Event e = events.top();
      events.pop();
      if (e.kind == kArrive) {
        std::size_t cls = e.frame.class_index;
        port.enqueue(cls, std::move(e.frame), t);
      } else if (e.kind == kComplete) {
        port.finish(t);
      } else if (e.generation != port.generation) {
        continue;
      }
      touched = true;
    }
    if (!touched || port.busy()) continue;
    port.advance(t);
    if (auto sel = port.select()) {
      auto [frame, end] = port.start(*sel, t);
      out.transmissions.push_back({static_cast<int>(frame.flow), *sel, t, end});
      events.push({end, kComplete, frame.flow, 0, 0, 0, {}});
    } else if (auto ready = port.next_ready(t)) {
      ++port.generation;
      events.push({*ready, kWake, 0, 0, 0, port.generation, {}});
    }
  }
  port.settle();
  for (auto& c : port.classes()) out.credit.push_back(c.trace_points);
  return out;
}

}  // namespace tsnwcd::sim
