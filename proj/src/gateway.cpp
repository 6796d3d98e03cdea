#include "vpsim/gateway.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

namespace vpsim {

using nlohmann::json;

std::string_view to_string(GatewayErrorKind k) noexcept {
  switch (k) {
    case GatewayErrorKind::network: return "network";
    case GatewayErrorKind::timeout: return "timeout";
    case GatewayErrorKind::rate_limited: return "rate_limited";
    case GatewayErrorKind::provider_rejected: return "provider_rejected";
    case GatewayErrorKind::malformed_response: return "malformed_response";
    case GatewayErrorKind::context_overflow: return "context_overflow";
  }
  return "unknown";
}

GatewayError::GatewayError(GatewayErrorKind kind, std::string detail)
    : Error(std::string(to_string(kind)) + ": " + detail), kind_(kind), detail_(std::move(detail)) {}

bool GatewayError::retryable() const noexcept {
  return kind_ == GatewayErrorKind::network || kind_ == GatewayErrorKind::timeout ||
         kind_ == GatewayErrorKind::rate_limited;
}

void ProviderConfig::check() const {
  std::vector<std::string> v;
  if (endpoint_url.empty()) v.emplace_back("provider.endpoint_url must not be empty");
  if (model_id.empty()) v.emplace_back("provider.model_id must not be empty");
  if (!(temperature >= 0.0 && temperature <= 2.0)) v.emplace_back("provider.temperature must be within [0, 2]");
  if (max_output_tokens <= 0) v.emplace_back("provider.max_output_tokens must be positive");
  if (retry.max_attempts < 1) v.emplace_back("provider.retry.max_attempts must be at least 1");
  if (retry.base_backoff.count() < 0) v.emplace_back("provider.retry.base_backoff must not be negative");
  if (!v.empty()) throw ValidationError(std::move(v));
}

Sleeper thread_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string complete_chat(ChatProvider& provider, const PromptPlan& plan,
                          const ProviderConfig& config, const Sleeper& sleep, CallStats* stats) {
  check_plan(plan);
  CallStats local;
  auto& st = stats ? *stats : local;
  st = {};
  auto backoff = config.retry.base_backoff;
  for (;;) {
    ++st.attempts;
    try {
      return provider.send(plan, config);
    } catch (const GatewayError& e) {
      if (!e.retryable() || st.attempts >= config.retry.max_attempts) throw;
    }
    ++st.retries;
    if (sleep) sleep(backoff);
    backoff *= 2;
  }
}

ChatGateway::ChatGateway(std::shared_ptr<ChatProvider> provider, ProviderConfig config,
                         Sleeper sleep)
    : provider_(std::move(provider)), config_(std::move(config)), sleep_(std::move(sleep)) {
  if (!provider_) throw Error("ChatGateway: no provider");
  config_.check();
}

std::string ChatGateway::complete_chat(const PromptPlan& plan, CallStats* stats) const {
  return vpsim::complete_chat(*provider_, plan, config_, sleep_, stats);
}

std::string build_request_body(const PromptPlan& plan, const ProviderConfig& config) {
  nlohmann::ordered_json body;
  body["model"] = config.model_id;
  auto& messages = body["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : plan.messages)
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_output_tokens;
  return body.dump();
}

std::string parse_completion_response(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw GatewayError(GatewayErrorKind::malformed_response, std::string("invalid JSON: ") + e.what());
  }
  const json* content = nullptr;
  if (doc.is_object() && doc.contains("choices") && doc["choices"].is_array() &&
      !doc["choices"].empty()) {
    const auto& first = doc["choices"][0];
    if (first.is_object() && first.contains("message") && first["message"].is_object() &&
        first["message"].contains("content"))
      content = &first["message"]["content"];
  }
  if (!content || !content->is_string())
    throw GatewayError(GatewayErrorKind::malformed_response,
                       "response has no choices[0].message.content");
  auto text = content->get<std::string>();
  if (text.empty())
    throw GatewayError(GatewayErrorKind::malformed_response, "assistant content is empty");
  return text;
}

GatewayError classify_http_error(int status, std::string_view body) {
  std::string detail = "HTTP " + std::to_string(status);
  std::string code;
  try {
    auto doc = json::parse(body);
    if (doc.is_object() && doc.contains("error") && doc["error"].is_object()) {
      const auto& err = doc["error"];
      if (err.contains("message") && err["message"].is_string())
        detail += ": " + err["message"].get<std::string>();
      if (err.contains("code") && err["code"].is_string()) code = err["code"].get<std::string>();
    }
  } catch (const json::exception&) {
  }
  if (code == "context_length_exceeded") return {GatewayErrorKind::context_overflow, detail};
  if (status == 429) return {GatewayErrorKind::rate_limited, detail};
  if (status == 408 || status == 504) return {GatewayErrorKind::timeout, detail};
  if (status >= 500) return {GatewayErrorKind::network, detail};
  return {GatewayErrorKind::provider_rejected, detail};
}

std::string plan_fingerprint(const PromptPlan& plan) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_canonical_json(plan)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScriptedProvider::ScriptedProvider(std::map<int, std::string> by_turn,
                                   std::map<std::string, std::string> by_fingerprint)
    : by_turn_(std::move(by_turn)), by_fingerprint_(std::move(by_fingerprint)) {
  if (by_turn_.empty() && by_fingerprint_.empty()) throw Error("scripted provider: no fixtures");
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::by_turn(std::map<int, std::string> replies) {
  return std::shared_ptr<ScriptedProvider>(new ScriptedProvider(std::move(replies), {}));
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::by_fingerprint(
    std::map<std::string, std::string> replies) {
  return std::shared_ptr<ScriptedProvider>(new ScriptedProvider({}, std::move(replies)));
}

std::string ScriptedProvider::send(const PromptPlan& plan, const ProviderConfig&) {
  {
    std::lock_guard lock(mutex_);
    ++calls_;
  }
  const auto fp = plan_fingerprint(plan);
  if (auto it = by_fingerprint_.find(fp); it != by_fingerprint_.end()) return it->second;
  const int turn = static_cast<int>(std::count_if(
      plan.messages.begin(), plan.messages.end(), [](const auto& m) { return m.role == Role::user; }));
  if (auto it = by_turn_.find(turn); it != by_turn_.end()) return it->second;
  throw GatewayError(GatewayErrorKind::provider_rejected,
                     "no scripted reply for plan " + fp + " (turn " + std::to_string(turn) + ")");
}

int ScriptedProvider::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::shared_ptr<ScriptedProvider> load_scripted_provider(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scripted fixtures: ") + e.what());
  }
  std::map<int, std::string> turns;
  std::map<std::string, std::string> prints;
  if (doc.contains("replies")) {
    for (const auto& [k, v] : doc["replies"].items()) {
      try {
        turns[std::stoi(k)] = v.get<std::string>();
      } catch (const std::exception&) {
        throw ParseError("scripted fixtures: bad turn entry '" + k + "'");
      }
    }
  }
  if (doc.contains("fingerprints")) {
    for (const auto& [k, v] : doc["fingerprints"].items()) prints[k] = v.get<std::string>();
  }
  return std::shared_ptr<ScriptedProvider>(new ScriptedProvider(std::move(turns), std::move(prints)));
}

}  // namespace vpsim
