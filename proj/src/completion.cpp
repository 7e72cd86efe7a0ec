#include "tsnwcd/completion.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "tsnwcd/parallel.hpp"

namespace tsnwcd::eval {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

EndpointConfig endpoint_from_json(const json& j) {
  EndpointConfig c;
  try {
    c.base_url = j.at("base_url").get<std::string>();
    c.model = j.at("model").get<std::string>();
    if (j.contains("temperature") && !j["temperature"].is_null()) c.temperature = j["temperature"].get<double>();
    if (j.contains("system_prompt") && !j["system_prompt"].is_null()) {
      c.system_prompt = j["system_prompt"].get<std::string>();
    }
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff_initial_ms = j.value("backoff_initial_ms", c.backoff_initial_ms);
    c.backoff_max_ms = j.value("backoff_max_ms", c.backoff_max_ms);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  } catch (const json::exception& e) {
    throw Error("bad endpoint config: " + std::string(e.what()));
  }
  if (c.timeout_s <= 0 || c.max_retries < 0 || c.max_in_flight == 0) throw Error("bad endpoint config limits");
  return c;
}

std::string_view to_string(FetchErrorKind kind) {
  switch (kind) {
    case FetchErrorKind::kAuth: return "auth";
    case FetchErrorKind::kTimeout: return "timeout";
    case FetchErrorKind::kMalformed: return "malformed";
    case FetchErrorKind::kHttp: return "http";
    case FetchErrorKind::kTransport: return "transport";
  }
  return "?";
}

namespace {

struct Target {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Target split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error("endpoint URL needs a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  Target t;
  t.origin = url.substr(0, slash);
  std::string path = slash == std::string::npos ? "" : url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  const std::string suffix = "/chat/completions";
  if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    path += suffix;
  }
  t.path = path;
  return t;
}

std::string request_body(const EndpointConfig& c, const std::string& prompt) {
  json messages = json::array();
  if (c.system_prompt) messages.push_back({{"role", "system"}, {"content", *c.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", prompt}});
  json body{{"model", c.model}, {"messages", messages}};
  if (c.temperature) body["temperature"] = *c.temperature;
  return body.dump();
}

std::optional<std::string> assistant_text(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  try {
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    if (content.is_null()) return std::string();
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

}  // namespace

FetchResult fetch_completion(const EndpointConfig& config, const std::string& prompt) {
  Target target;
  try {
    target = split_url(config.base_url);
  } catch (const Error& e) {
    return FetchFailure{FetchErrorKind::kTransport, e.what(), 0, std::nullopt};
  }
  httplib::Client client(target.origin);
  if (!client.is_valid()) {
    return FetchFailure{FetchErrorKind::kTransport, "unsupported endpoint " + target.origin, 0, std::nullopt};
  }
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(config.timeout_s));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = request_body(config, prompt);

  const auto started = Clock::now();
  FetchFailure last;
  double backoff = config.backoff_initial_ms;
  for (int attempt = 1; attempt <= config.max_retries + 1; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff));
      backoff = std::min(backoff * 2, config.backoff_max_ms);
    }
    auto res = client.Post(target.path, headers, body, "application/json");
    if (!res) {
      auto err = res.error();
      bool timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
      last = FetchFailure{timed_out ? FetchErrorKind::kTimeout : FetchErrorKind::kTransport, httplib::to_string(err),
                          attempt, std::nullopt};
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      return FetchFailure{FetchErrorKind::kAuth, "authentication rejected", attempt, res->status};
    }
    if (res->status == 429 || res->status >= 500) {
      last = FetchFailure{FetchErrorKind::kHttp, "HTTP " + std::to_string(res->status), attempt, res->status};
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      return FetchFailure{FetchErrorKind::kHttp, "HTTP " + std::to_string(res->status), attempt, res->status};
    }
    auto text = assistant_text(res->body);
    if (!text) return FetchFailure{FetchErrorKind::kMalformed, "response has no assistant message", attempt, res->status};
    double ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
    return Completion{std::move(*text), ms, attempt};
  }
  return last;
}

std::vector<FetchResult> fetch_all(const EndpointConfig& config, const std::vector<std::string>& prompts) {
  std::vector<FetchResult> out(prompts.size());
  parallel_for(prompts.size(), config.max_in_flight,
               [&](std::size_t i) { out[i] = fetch_completion(config, prompts[i]); });
  return out;
}

PredictionSet prediction_from_fetch(const FetchResult& result, const std::string& testcase,
                                    const std::vector<FlowId>& flow_ids) {
  if (const auto* ok = std::get_if<Completion>(&result)) return parse_prediction(ok->text, testcase, flow_ids);
  const auto& failure = std::get<FetchFailure>(result);
  PredictionSet p = failure.kind == FetchErrorKind::kTimeout ? timeout_prediction(testcase) : PredictionSet{};
  p.testcase = testcase;
  p.diagnostics.push_back(std::string(to_string(failure.kind)) + ": " + failure.message);
  return p;
}

}  // namespace tsnwcd::eval
