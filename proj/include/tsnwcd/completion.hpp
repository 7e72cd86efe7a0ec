#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tsnwcd/evalharness.hpp"

// Chat-completion client for collecting model answers.
namespace tsnwcd::eval {

struct EndpointConfig {
  // e.g. "https://api.example.com/v1"; "/chat/completions" is appended
  // unless already present.
  std::string base_url;
  std::string model;
  std::optional<double> temperature;
  std::optional<std::string> system_prompt;
  double timeout_s = 120;
  int max_retries = 3;
  double backoff_initial_ms = 1000;
  double backoff_max_ms = 30000;
  // Bearer token source; no Authorization header when unset.
  std::string api_key_env = "TSNWCD_API_KEY";
  unsigned max_in_flight = 4;
};

EndpointConfig endpoint_from_json(const nlohmann::json& j);

struct Completion {
  std::string text;
  double latency_ms = 0;
  int attempts = 0;
};

enum class FetchErrorKind { kAuth, kTimeout, kMalformed, kHttp, kTransport };
std::string_view to_string(FetchErrorKind kind);

struct FetchFailure {
  FetchErrorKind kind = FetchErrorKind::kTransport;
  std::string message;
  int attempts = 0;
  std::optional<int> status;
};

using FetchResult = std::variant<Completion, FetchFailure>;

// Retries 429, 5xx, connection failures and timeouts with exponential
// backoff; authentication and malformed responses fail immediately.
FetchResult fetch_completion(const EndpointConfig& config, const std::string& prompt);

// Results are in prompt order; at most config.max_in_flight requests run
// at once.
std::vector<FetchResult> fetch_all(const EndpointConfig& config, const std::vector<std::string>& prompts);

// Timeouts map to FailureMode::kTimeout, other failures to kEmpty.
PredictionSet prediction_from_fetch(const FetchResult& result, const std::string& testcase,
                                    const std::vector<FlowId>& flow_ids);

}  // namespace tsnwcd::eval
