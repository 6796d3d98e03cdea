#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "vpsim/errors.hpp"
#include "vpsim/prompt.hpp"

namespace vpsim {

struct RetrySettings {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{500};
};

struct ProviderConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_id = "gpt-4";
  double temperature = 0.7;
  int max_output_tokens = 512;
  /// Name of the environment variable holding the API key.
  std::string credential_ref = "OPENAI_API_KEY";
  RetrySettings retry;
  std::chrono::milliseconds request_timeout{60000};

  /// Throws ValidationError on out-of-range values.
  void check() const;
};

enum class GatewayErrorKind {
  network,
  timeout,
  rate_limited,
  provider_rejected,
  malformed_response,
  context_overflow
};

std::string_view to_string(GatewayErrorKind k) noexcept;

class GatewayError : public Error {
 public:
  GatewayError(GatewayErrorKind kind, std::string detail);

  GatewayErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  /// network, timeout and rate_limited are transient.
  bool retryable() const noexcept;

 private:
  GatewayErrorKind kind_;
  std::string detail_;
};

/// One attempt against a chat-completion backend. Implementations must be
/// safe for concurrent calls.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string send(const PromptPlan& plan, const ProviderConfig& config) = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper thread_sleeper();

struct CallStats {
  int attempts = 0;
  int retries = 0;
};

/// Sends `plan`, retrying transient failures up to config.retry.max_attempts
/// total attempts with exponential backoff (base, 2*base, 4*base, ...).
/// Returns the assistant content verbatim.
std::string complete_chat(ChatProvider& provider, const PromptPlan& plan,
                          const ProviderConfig& config, const Sleeper& sleep = thread_sleeper(),
                          CallStats* stats = nullptr);

/// Provider plus the config it runs with; what the conversation engine holds.
class ChatGateway {
 public:
  ChatGateway(std::shared_ptr<ChatProvider> provider, ProviderConfig config,
              Sleeper sleep = thread_sleeper());

  std::string complete_chat(const PromptPlan& plan, CallStats* stats = nullptr) const;
  const ProviderConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<ChatProvider> provider_;
  ProviderConfig config_;
  Sleeper sleep_;
};

// ---------------------------------------------------------------------------
// Wire format (chat-completions request/response shape)

/// {"model":...,"messages":[{"role":...,"content":...}],"temperature":...,"max_tokens":...}
std::string build_request_body(const PromptPlan& plan, const ProviderConfig& config);

/// Extracts choices[0].message.content; malformed_response otherwise.
std::string parse_completion_response(std::string_view body);

/// Maps an HTTP status + body from the provider onto the error taxonomy.
GatewayError classify_http_error(int status, std::string_view body);

/// Talks to any endpoint implementing the chat-completions shape.
class OpenAiCompatibleProvider final : public ChatProvider {
 public:
  /// Reads the API key from the environment variable named in credential_ref
  /// at call time; an unset variable sends no Authorization header.
  OpenAiCompatibleProvider() = default;
  std::string send(const PromptPlan& plan, const ProviderConfig& config) override;
};

// ---------------------------------------------------------------------------
// Deterministic provider for tests and replays

/// FNV-1a 64 over the canonical plan serialization, 16 hex digits.
std::string plan_fingerprint(const PromptPlan& plan);

/// Replies from fixtures keyed either by plan fingerprint or by turn index
/// (number of user messages in the plan, starting at 1). Unknown plans fail
/// with provider_rejected naming the fingerprint.
class ScriptedProvider final : public ChatProvider {
 public:
  static std::shared_ptr<ScriptedProvider> by_turn(std::map<int, std::string> replies);
  static std::shared_ptr<ScriptedProvider> by_fingerprint(std::map<std::string, std::string> replies);

  std::string send(const PromptPlan& plan, const ProviderConfig& config) override;

  int calls() const;

 private:
  friend std::shared_ptr<ScriptedProvider> load_scripted_provider(std::string_view document);

  ScriptedProvider(std::map<int, std::string> by_turn,
                   std::map<std::string, std::string> by_fingerprint);

  std::map<int, std::string> by_turn_;
  std::map<std::string, std::string> by_fingerprint_;
  mutable std::mutex mutex_;
  int calls_ = 0;
};

/// Loads turn-indexed fixtures: {"replies": {"1": "...", "2": "..."}} or a
/// fingerprint map {"fingerprints": {"<hex>": "..."}}.
std::shared_ptr<ScriptedProvider> load_scripted_provider(std::string_view document);

}  // namespace vpsim
