#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vpsim/gateway.hpp"
#include "vpsim/illness_script.hpp"
#include "vpsim/prompt.hpp"
#include "vpsim/stats.hpp"
#include "vpsim/timestamp.hpp"

namespace vpsim {

enum class SessionStatus { consented, chatting, questionnaire, complete, excluded };

std::string_view to_string(SessionStatus s) noexcept;
std::optional<SessionStatus> parse_session_status(std::string_view text) noexcept;

/// consented -> chatting -> questionnaire -> complete; excluded from chatting onward.
bool is_valid_transition(SessionStatus from, SessionStatus to) noexcept;

inline constexpr std::chrono::minutes kMinimumStudyDuration{3};

struct Session {
  std::string session_id;
  std::string participant_token;
  std::string script_id;
  SatirStyle style = SatirStyle::accuser;
  std::string locale;
  Timestamp consent_at{};
  std::optional<Timestamp> started_at;  // chat opened
  std::optional<Timestamp> ended_at;    // questionnaire submitted
  std::vector<ChatMessage> transcript;  // non-system messages only
  SessionStatus status = SessionStatus::consented;
  bool questionnaire_submitted = false;
  std::optional<std::string> exclusion_reason;

  std::size_t participant_message_count() const;
  bool operator==(const Session&) const = default;
};

/// Scripts available for assignment, keyed by (style, locale).
class ScriptRegistry {
 public:
  void add(IllnessScript script);

  const IllnessScript* find(SatirStyle style, std::string_view locale) const;
  const IllnessScript* find_by_id(std::string_view script_id) const;
  /// Styles with a script for `locale`, in enum order.
  std::vector<SatirStyle> styles_for(std::string_view locale) const;
  /// Every style with at least one script.
  std::set<SatirStyle> styles() const;
  std::vector<std::string> locales() const;
  bool empty() const noexcept { return scripts_.empty(); }

 private:
  std::map<std::pair<SatirStyle, std::string>, std::shared_ptr<const IllnessScript>> scripts_;
};

/// Per-style assignment counts with a seeded tie-breaker.
struct AssignmentLedger {
  std::map<SatirStyle, std::int64_t> counts;
  std::uint64_t rng_seed = 0;
  std::mt19937_64 rng{0};

  explicit AssignmentLedger(std::uint64_t seed = 0) : rng_seed(seed), rng(seed) {}
};

/// Least-count-first among `available`, ties broken by a uniform draw from
/// the ledger's RNG. `forced` overrides. Increments the chosen count.
SatirStyle assign_style(AssignmentLedger& ledger, std::span<const SatirStyle> available,
                        std::optional<SatirStyle> forced);

/// Flags sessions that were too short or lack a questionnaire. Sessions that
/// never started chatting are returned unchanged.
Session apply_exclusion_rules(Session session);

struct EngagementStats {
  MeanStd messages;  // participant messages per session
  MeanStd minutes;
};

/// Per style, over non-excluded sessions with a recorded end time.
std::map<SatirStyle, EngagementStats> engagement_stats(std::span<const Session> sessions);

/// Callbacks the service layer uses for persistence and auditing. Invoked
/// under the engine lock with the new state, before it replaces the old one;
/// a throwing observer leaves the session unchanged.
struct EngineObserver {
  virtual ~EngineObserver() = default;
  virtual void session_changed(const Session& /*session*/) {}
  virtual void transition(const Session& /*session*/, std::optional<SessionStatus> /*from*/,
                          SessionStatus /*to*/, std::string_view /*reason*/) {}
  virtual void message_appended(const Session& /*session*/, std::size_t /*index*/) {}
};

struct EngineOptions {
  std::uint64_t seed = 0;
  Clock clock = system_clock();
  /// Random source for session ids and participant tokens. Seeded from
  /// `seed` when deterministic_ids is set, from std::random_device otherwise.
  bool deterministic_ids = false;
};

struct TurnResult {
  std::string display_reply;
  Session session;
};

/// Session lifecycle. Safe for concurrent use; turns on one session are
/// serialized and a concurrent second turn is rejected with StateError.
class ConversationEngine {
 public:
  ConversationEngine(std::shared_ptr<const ScriptRegistry> scripts,
                     std::shared_ptr<const ChatGateway> gateway, EngineOptions options = {});

  void set_observer(EngineObserver* observer) { observer_ = observer; }

  /// Re-registers previously persisted sessions and rebuilds the ledger.
  void restore(std::vector<Session> sessions);

  Session create_session(std::string_view locale, std::optional<SatirStyle> forced_style = {});
  Session start_chat(const std::string& session_id);
  TurnResult post_user_message(const std::string& session_id, std::string_view text);
  Session finish_chat(const std::string& session_id);
  /// Marks the questionnaire response as stored; status must be questionnaire.
  Session mark_questionnaire_submitted(const std::string& session_id);
  Session complete_session(const std::string& session_id);
  Session exclude(const std::string& session_id, std::string reason);
  Session apply_exclusion_rules(const std::string& session_id);

  Session get(const std::string& session_id) const;
  std::vector<Session> list() const;
  AssignmentLedger ledger() const;

  const ScriptRegistry& scripts() const { return *scripts_; }

 private:
  struct Slot {
    Session session;
    bool busy = false;
  };

  std::string random_token(std::size_t bytes);
  Session transition(const std::string& session_id, SessionStatus from, SessionStatus to);
  Slot& slot(const std::string& session_id);
  const Slot& slot(const std::string& session_id) const;

  std::shared_ptr<const ScriptRegistry> scripts_;
  std::shared_ptr<const ChatGateway> gateway_;
  EngineOptions options_;
  EngineObserver* observer_ = nullptr;

  mutable std::mutex mutex_;
  std::map<std::string, Slot> sessions_;
  AssignmentLedger ledger_;
  std::mt19937_64 id_rng_;
};

}  // namespace vpsim
