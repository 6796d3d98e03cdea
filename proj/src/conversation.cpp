#include "vpsim/conversation.hpp"

#include <algorithm>
#include <cstdio>

#include "vpsim/errors.hpp"

namespace vpsim {

std::string_view to_string(SessionStatus s) noexcept {
  switch (s) {
    case SessionStatus::consented: return "consented";
    case SessionStatus::chatting: return "chatting";
    case SessionStatus::questionnaire: return "questionnaire";
    case SessionStatus::complete: return "complete";
    case SessionStatus::excluded: return "excluded";
  }
  return "unknown";
}

std::optional<SessionStatus> parse_session_status(std::string_view text) noexcept {
  for (auto s : {SessionStatus::consented, SessionStatus::chatting, SessionStatus::questionnaire,
                 SessionStatus::complete, SessionStatus::excluded})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

bool is_valid_transition(SessionStatus from, SessionStatus to) noexcept {
  using S = SessionStatus;
  switch (to) {
    case S::chatting: return from == S::consented;
    case S::questionnaire: return from == S::chatting;
    case S::complete: return from == S::questionnaire;
    case S::excluded: return from == S::chatting || from == S::questionnaire || from == S::complete;
    case S::consented: return false;
  }
  return false;
}

std::size_t Session::participant_message_count() const {
  return static_cast<std::size_t>(std::count_if(
      transcript.begin(), transcript.end(), [](const auto& m) { return m.role == Role::user; }));
}

// ---------------------------------------------------------------------------

void ScriptRegistry::add(IllnessScript script) {
  auto key = std::make_pair(script.style, script.locale);
  scripts_[key] = std::make_shared<const IllnessScript>(std::move(script));
}

const IllnessScript* ScriptRegistry::find(SatirStyle style, std::string_view locale) const {
  auto it = scripts_.find({style, std::string(locale)});
  return it == scripts_.end() ? nullptr : it->second.get();
}

const IllnessScript* ScriptRegistry::find_by_id(std::string_view script_id) const {
  for (const auto& [_, s] : scripts_)
    if (s->script_id == script_id) return s.get();
  return nullptr;
}

std::vector<SatirStyle> ScriptRegistry::styles_for(std::string_view locale) const {
  std::vector<SatirStyle> out;
  for (auto style : kAllStyles)
    if (find(style, locale)) out.push_back(style);
  return out;
}

std::set<SatirStyle> ScriptRegistry::styles() const {
  std::set<SatirStyle> out;
  for (const auto& [key, _] : scripts_) out.insert(key.first);
  return out;
}

std::vector<std::string> ScriptRegistry::locales() const {
  std::set<std::string> out;
  for (const auto& [key, _] : scripts_) out.insert(key.second);
  return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------

SatirStyle assign_style(AssignmentLedger& ledger, std::span<const SatirStyle> available,
                        std::optional<SatirStyle> forced) {
  if (available.empty()) throw Error("assign_style: no styles available");
  SatirStyle chosen;
  if (forced) {
    if (std::find(available.begin(), available.end(), *forced) == available.end())
      throw ValidationError({"no script registered for style '" + std::string(to_string(*forced)) + "'"});
    chosen = *forced;
  } else {
    std::int64_t least = INT64_MAX;
    for (auto s : available) least = std::min(least, ledger.counts[s]);
    std::vector<SatirStyle> tied;
    for (auto s : available)
      if (ledger.counts[s] == least) tied.push_back(s);
    std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
    chosen = tied.size() == 1 ? tied.front() : tied[pick(ledger.rng)];
  }
  ++ledger.counts[chosen];
  return chosen;
}

Session apply_exclusion_rules(Session s) {
  if (s.status == SessionStatus::consented || s.status == SessionStatus::excluded) return s;
  if (!s.questionnaire_submitted) {
    s.status = SessionStatus::excluded;
    s.exclusion_reason = "no questionnaire";
    return s;
  }
  if (s.started_at && s.ended_at && *s.ended_at - *s.started_at < kMinimumStudyDuration) {
    s.status = SessionStatus::excluded;
    s.exclusion_reason = "under 3 minutes";
  }
  return s;
}

std::map<SatirStyle, EngagementStats> engagement_stats(std::span<const Session> sessions) {
  std::map<SatirStyle, std::pair<std::vector<double>, std::vector<double>>> by_style;
  for (const auto& s : sessions) {
    if (s.status == SessionStatus::excluded) continue;
    if (!s.started_at || !s.ended_at)
      throw ValidationError({"session " + s.session_id + " has no recorded duration"});
    const auto ms = to_epoch_ms(*s.ended_at) - to_epoch_ms(*s.started_at);
    auto& [msgs, mins] = by_style[s.style];
    msgs.push_back(static_cast<double>(s.participant_message_count()));
    mins.push_back(static_cast<double>(ms) / 60000.0);
  }
  if (by_style.empty()) throw Error("engagement_stats: no sessions");
  std::map<SatirStyle, EngagementStats> out;
  for (const auto& [style, data] : by_style)
    out[style] = {mean_std(data.first), mean_std(data.second)};
  return out;
}

// ---------------------------------------------------------------------------

ConversationEngine::ConversationEngine(std::shared_ptr<const ScriptRegistry> scripts,
                                       std::shared_ptr<const ChatGateway> gateway,
                                       EngineOptions options)
    : scripts_(std::move(scripts)),
      gateway_(std::move(gateway)),
      options_(std::move(options)),
      ledger_(options_.seed),
      id_rng_(options_.deterministic_ids ? options_.seed ^ 0x9e3779b97f4a7c15ULL
                                         : std::random_device{}()) {
  if (!scripts_ || scripts_->empty()) throw Error("conversation engine: no scripts registered");
  if (!gateway_) throw Error("conversation engine: no gateway");
  if (!options_.clock) options_.clock = system_clock();
  for (auto style : scripts_->styles()) ledger_.counts[style] = 0;
}

std::string ConversationEngine::random_token(std::size_t bytes) {
  std::string out;
  char buf[3];
  for (std::size_t i = 0; i < bytes; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", static_cast<unsigned>(id_rng_() & 0xffU));
    out += buf;
  }
  return out;
}

ConversationEngine::Slot& ConversationEngine::slot(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

const ConversationEngine::Slot& ConversationEngine::slot(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

void ConversationEngine::restore(std::vector<Session> sessions) {
  std::lock_guard lock(mutex_);
  for (auto& s : sessions) {
    ++ledger_.counts[s.style];
    auto id = s.session_id;
    sessions_[id] = Slot{std::move(s), false};
  }
}

Session ConversationEngine::create_session(std::string_view locale,
                                           std::optional<SatirStyle> forced_style) {
  std::lock_guard lock(mutex_);
  const auto available = scripts_->styles_for(locale);
  if (available.empty()) throw ValidationError({"no script for locale '" + std::string(locale) + "'"});

  auto ledger = ledger_;
  const auto style = assign_style(ledger, available, forced_style);
  const auto* script = scripts_->find(style, locale);

  Session s;
  do {
    s.session_id = "s-" + random_token(8);
  } while (sessions_.contains(s.session_id));
  s.participant_token = "p-" + random_token(16);
  s.script_id = script->script_id;
  s.style = style;
  s.locale = std::string(locale);
  s.consent_at = options_.clock();
  s.status = SessionStatus::consented;
  s.transcript.push_back(build_opening(*script).prefix.back());

  if (observer_) {
    observer_->session_changed(s);
    observer_->message_appended(s, 0);
    observer_->transition(s, std::nullopt, SessionStatus::consented, "consent given");
  }
  ledger_ = std::move(ledger);
  sessions_[s.session_id] = Slot{s, false};
  return s;
}

Session ConversationEngine::transition(const std::string& id, SessionStatus from, SessionStatus to) {
  std::lock_guard lock(mutex_);
  auto& sl = slot(id);
  if (sl.busy) throw StateError("session " + id + " has a turn in flight");
  if (sl.session.status != from || !is_valid_transition(from, to))
    throw StateError("session " + id + " is " + std::string(to_string(sl.session.status)) +
                     ", cannot move to " + std::string(to_string(to)));
  Session next = sl.session;
  next.status = to;
  if (to == SessionStatus::chatting) next.started_at = options_.clock();
  if (to == SessionStatus::complete) next.ended_at = options_.clock();
  if (observer_) {
    observer_->session_changed(next);
    observer_->transition(next, from, to, "");
  }
  sl.session = next;
  return next;
}

Session ConversationEngine::start_chat(const std::string& id) {
  return transition(id, SessionStatus::consented, SessionStatus::chatting);
}

Session ConversationEngine::finish_chat(const std::string& id) {
  return transition(id, SessionStatus::chatting, SessionStatus::questionnaire);
}

Session ConversationEngine::mark_questionnaire_submitted(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto& sl = slot(id);
  if (sl.session.status != SessionStatus::questionnaire)
    throw StateError("session " + id + " is " + std::string(to_string(sl.session.status)) +
                     ", questionnaire not open");
  if (sl.session.questionnaire_submitted)
    throw StateError("session " + id + " already has a questionnaire response");
  Session next = sl.session;
  next.questionnaire_submitted = true;
  if (observer_) observer_->session_changed(next);
  sl.session = next;
  return next;
}

Session ConversationEngine::complete_session(const std::string& id) {
  {
    std::lock_guard lock(mutex_);
    const auto& sl = slot(id);
    if (sl.session.status == SessionStatus::questionnaire && !sl.session.questionnaire_submitted)
      throw StateError("session " + id + " has no stored questionnaire response");
  }
  return transition(id, SessionStatus::questionnaire, SessionStatus::complete);
}

Session ConversationEngine::exclude(const std::string& id, std::string reason) {
  std::lock_guard lock(mutex_);
  auto& sl = slot(id);
  const auto from = sl.session.status;
  if (!is_valid_transition(from, SessionStatus::excluded))
    throw StateError("session " + id + " is " + std::string(to_string(from)) + ", cannot be excluded");
  Session next = sl.session;
  next.status = SessionStatus::excluded;
  next.exclusion_reason = std::move(reason);
  if (observer_) {
    observer_->session_changed(next);
    observer_->transition(next, from, SessionStatus::excluded, *next.exclusion_reason);
  }
  sl.session = next;
  return next;
}

Session ConversationEngine::apply_exclusion_rules(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto& sl = slot(id);
  if (sl.busy) throw StateError("session " + id + " has a turn in flight");
  const auto from = sl.session.status;
  Session next = vpsim::apply_exclusion_rules(sl.session);
  if (next.status != from) {
    if (observer_) {
      observer_->session_changed(next);
      observer_->transition(next, from, next.status, next.exclusion_reason.value_or(""));
    }
    sl.session = next;
  }
  return next;
}

TurnResult ConversationEngine::post_user_message(const std::string& id, std::string_view text) {
  const IllnessScript* script = nullptr;
  std::vector<ChatMessage> history;
  {
    std::lock_guard lock(mutex_);
    auto& sl = slot(id);
    if (sl.session.status != SessionStatus::chatting)
      throw StateError("session " + id + " is " + std::string(to_string(sl.session.status)) +
                       ", not chatting");
    if (sl.busy) throw StateError("session " + id + " has a turn in flight");
    script = scripts_->find_by_id(sl.session.script_id);
    if (!script) throw NotFoundError("script '" + sl.session.script_id + "' is not registered");
    history = sl.session.transcript;
    sl.busy = true;
  }
  auto release = [&] {
    std::lock_guard lock(mutex_);
    slot(id).busy = false;
  };

  std::string reply;
  std::string display;
  try {
    const auto plan = assemble(*script, history, text);
    reply = gateway_->complete_chat(plan);
    try {
      display = strip_for_display(reply);
    } catch (const ParseError& e) {
      throw GatewayError(GatewayErrorKind::malformed_response, e.what());
    }
    if (display.empty())
      throw GatewayError(GatewayErrorKind::malformed_response, "reply has no visible text");
  } catch (...) {
    release();
    throw;
  }

  std::lock_guard lock(mutex_);
  auto& sl = slot(id);
  sl.busy = false;
  Session next = sl.session;
  next.transcript.push_back({Role::user, std::string(text), Origin::participant});
  next.transcript.push_back({Role::assistant, reply, Origin::model});
  if (observer_) {
    observer_->message_appended(next, next.transcript.size() - 2);
    observer_->message_appended(next, next.transcript.size() - 1);
    observer_->session_changed(next);
  }
  sl.session = next;
  return {display, next};
}

Session ConversationEngine::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return slot(id).session;
}

std::vector<Session> ConversationEngine::list() const {
  std::lock_guard lock(mutex_);
  std::vector<Session> out;
  out.reserve(sessions_.size());
  for (const auto& [_, sl] : sessions_) out.push_back(sl.session);
  return out;
}

AssignmentLedger ConversationEngine::ledger() const {
  std::lock_guard lock(mutex_);
  return ledger_;
}

}  // namespace vpsim
