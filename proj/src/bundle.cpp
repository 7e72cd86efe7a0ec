#include "tsnwcd/bundle.hpp"

#include <fstream>
#include <sstream>

namespace tsnwcd::net {

namespace fs = std::filesystem;
using nlohmann::json;

json rational_to_json(const Rational& value) {
  if (is_integer(value) && value.get_num().fits_slong_p()) return value.get_num().get_si();
  return to_exact_string(value);
}

Rational rational_from_json(const json& value) {
  if (value.is_string()) return parse_rational(value.get<std::string>());
  if (value.is_number_integer()) return Rational(value.dump());
  if (value.is_number_float()) return parse_rational(value.dump());
  throw Error("expected a number, got " + value.dump());
}

json constants_to_json(const NetworkConstants& k, Mechanism mechanism) {
  json j;
  j["mechanism"] = std::string(to_string(mechanism));
  j["link_rate_bits_per_us"] = rational_to_json(k.link_rate_bits_per_us);
  j["propagation_us"] = rational_to_json(k.propagation_us);
  j["switching_us"] = rational_to_json(k.switching_us);
  j["sync_error_us"] = rational_to_json(k.sync_error_us);
  j["idle_slope_fraction"] = rational_to_json(k.idle_slope_fraction);
  j["frame_overhead_bytes"] = k.frame_overhead_bytes;
  j["cut_through"] = k.cut_through;
  j["best_effort_max_payload_bytes"] = k.best_effort_max_payload_bytes;
  j["cycle_us"] = k.cycle_us ? rational_to_json(*k.cycle_us) : json(nullptr);
  j["xi_policy"] = std::string(to_string(k.xi_policy));
  j["explicit_xi_us"] = k.explicit_xi_us ? rational_to_json(*k.explicit_xi_us) : json(nullptr);
  json offsets = json::object();
  for (const auto& [id, off] : k.offsets_us) offsets[std::to_string(id)] = rational_to_json(off);
  j["offsets_us"] = offsets;
  return j;
}

NetworkConstants constants_from_json(const json& j, Mechanism* mechanism) {
  if (!j.is_object()) throw Error("constants must be a JSON object");
  NetworkConstants k;
  auto rational = [&](const char* key, Rational& out) {
    if (j.contains(key) && !j[key].is_null()) out = rational_from_json(j[key]);
  };
  try {
    if (mechanism && j.contains("mechanism")) *mechanism = parse_mechanism(j["mechanism"].get<std::string>());
    rational("link_rate_bits_per_us", k.link_rate_bits_per_us);
    rational("propagation_us", k.propagation_us);
    rational("switching_us", k.switching_us);
    rational("sync_error_us", k.sync_error_us);
    rational("idle_slope_fraction", k.idle_slope_fraction);
    if (j.contains("frame_overhead_bytes")) k.frame_overhead_bytes = j["frame_overhead_bytes"].get<std::int64_t>();
    if (j.contains("cut_through")) k.cut_through = j["cut_through"].get<bool>();
    if (j.contains("best_effort_max_payload_bytes")) {
      k.best_effort_max_payload_bytes = j["best_effort_max_payload_bytes"].get<std::int64_t>();
    }
    if (j.contains("cycle_us") && !j["cycle_us"].is_null()) k.cycle_us = rational_from_json(j["cycle_us"]);
    if (j.contains("xi_policy")) k.xi_policy = parse_xi_policy(j["xi_policy"].get<std::string>());
    if (j.contains("explicit_xi_us") && !j["explicit_xi_us"].is_null()) {
      k.explicit_xi_us = rational_from_json(j["explicit_xi_us"]);
    }
    if (j.contains("offsets_us")) {
      for (const auto& [id, off] : j["offsets_us"].items()) {
        k.offsets_us[std::stoll(id)] = rational_from_json(off);
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("bad constants: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(std::string("bad constants: ") + e.what());
  }
  return k;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::string infer_name(const fs::path& dir) {
  std::string found;
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string file = entry.path().filename().string();
    const std::string suffix = "_topo.txt";
    if (file.size() > suffix.size() && file.compare(file.size() - suffix.size(), suffix.size(), suffix) == 0) {
      if (!found.empty()) throw Error("several bundles in " + dir.string() + "; pass a name");
      found = file.substr(0, file.size() - suffix.size());
    }
  }
  if (found.empty()) throw Error("no *_topo.txt in " + dir.string());
  return found;
}

template <typename Fn>
auto with_source(const fs::path& file, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError(file.string(), e.line(), e.field(), e.message());
  }
}

}  // namespace

TestCase load_testcase(const fs::path& dir, std::string name) {
  if (name.empty()) name = infer_name(dir);
  TestCase tc;
  tc.name = name;
  auto file = [&](const char* suffix) { return dir / (name + suffix); };

  json config;
  try {
    config = json::parse(read_file(file("_config.json")));
  } catch (const json::exception& e) {
    throw Error(file("_config.json").string() + ": " + e.what());
  }
  tc.constants = constants_from_json(config, &tc.mechanism);
  tc.topology = with_source(file("_topo.txt"), [&] { return parse_topology(read_file(file("_topo.txt"))); });
  apply_constants(tc.topology, tc.constants);
  tc.flows = with_source(file("_flows.txt"), [&] { return parse_flows(read_file(file("_flows.txt"))); });
  tc.routes = with_source(file("_route.txt"), [&] {
    return parse_routes(read_file(file("_route.txt")), tc.topology, tc.flows);
  });
  return tc;
}

void write_testcase(const fs::path& dir, const TestCase& tc) {
  fs::create_directories(dir);
  write_file(dir / (tc.name + "_topo.txt"), serialize_topology(tc.topology));
  write_file(dir / (tc.name + "_flows.txt"), serialize_flows(tc.flows));
  write_file(dir / (tc.name + "_route.txt"), serialize_routes(tc.routes));
  write_file(dir / (tc.name + "_config.json"), constants_to_json(tc.constants, tc.mechanism).dump(2) + "\n");
}

}  // namespace tsnwcd::net
