#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "tsnwcd/netmodel.hpp"

namespace tsnwcd::net {

// Exact rationals in JSON: integers are emitted as numbers, everything else
// as an exact decimal (or "p/q") string. Reading accepts either.
nlohmann::json rational_to_json(const Rational& value);
Rational rational_from_json(const nlohmann::json& value);

nlohmann::json constants_to_json(const NetworkConstants& constants, Mechanism mechanism);
// Missing keys keep their defaults; `mechanism` is updated when present.
NetworkConstants constants_from_json(const nlohmann::json& json, Mechanism* mechanism = nullptr);

// Bundle layout: <name>_topo.txt, <name>_flows.txt, <name>_route.txt,
// <name>_config.json. `name` may be empty when the directory holds one bundle.
TestCase load_testcase(const std::filesystem::path& dir, std::string name = {});
void write_testcase(const std::filesystem::path& dir, const TestCase& tc);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename so readers never see partial output.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace tsnwcd::net
