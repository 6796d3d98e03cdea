#include "vpsim/prompt.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "vpsim/errors.hpp"

namespace vpsim {

namespace {

constexpr std::size_t kMessagesAfterNote = 6;

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::system: return "system";
    case Role::assistant: return "assistant";
    case Role::user: return "user";
  }
  return "unknown";
}

std::string_view to_string(Origin o) noexcept {
  switch (o) {
    case Origin::scripted: return "scripted";
    case Origin::model: return "model";
    case Origin::participant: return "participant";
    case Origin::injected_note: return "injected_note";
  }
  return "unknown";
}

std::optional<Role> parse_role(std::string_view text) noexcept {
  for (auto r : {Role::system, Role::assistant, Role::user})
    if (to_string(r) == text) return r;
  return std::nullopt;
}

std::optional<Origin> parse_origin(std::string_view text) noexcept {
  for (auto o : {Origin::scripted, Origin::model, Origin::participant, Origin::injected_note})
    if (to_string(o) == text) return o;
  return std::nullopt;
}

bool is_well_formed(const ChatMessage& m) noexcept {
  if (m.content.empty()) return false;
  if (m.role == Role::user && m.origin != Origin::participant) return false;
  if (m.origin == Origin::participant && m.role != Role::user) return false;
  if (m.origin == Origin::injected_note && m.role != Role::system) return false;
  return true;
}

std::size_t note_position(std::size_t n_nonsystem) {
  if (n_nonsystem == 0) throw Error("note_position: at least one non-system message required");
  return n_nonsystem > kMessagesAfterNote ? n_nonsystem - kMessagesAfterNote : 0;
}

void check_history(std::span<const ChatMessage> history) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& m = history[i];
    const Role expected = i % 2 == 0 ? Role::assistant : Role::user;
    if (m.role != expected) {
      v.push_back("history[" + std::to_string(i) + "]: expected " +
                  std::string(to_string(expected)) + ", found " + std::string(to_string(m.role)));
    }
    if (!is_well_formed(m)) v.push_back("history[" + std::to_string(i) + "]: malformed message");
  }
  if (!v.empty()) throw ValidationError(std::move(v));
}

void check_plan(const PromptPlan& plan) {
  std::vector<std::string> v;
  const auto& msgs = plan.messages;
  if (msgs.empty() || msgs.front().role != Role::system || msgs.front().origin == Origin::injected_note)
    v.emplace_back("first message must be the short-case system message");
  const auto notes = std::count_if(msgs.begin(), msgs.end(),
                                   [](const auto& m) { return m.origin == Origin::injected_note; });
  if (notes != 1) v.push_back("expected exactly one author's note, found " + std::to_string(notes));
  if (plan.note_index >= msgs.size() || msgs[plan.note_index].origin != Origin::injected_note)
    v.emplace_back("note_index does not point at the author's note");
  if (msgs.empty() || msgs.back().role != Role::user)
    v.emplace_back("last message must be the current user turn");
  std::size_t k = 0;
  for (const auto& m : msgs) {
    if (!is_well_formed(m)) v.emplace_back("malformed message in plan");
    if (m.role == Role::system) continue;
    const Role expected = k % 2 == 0 ? Role::assistant : Role::user;
    if (m.role != expected) {
      v.push_back("non-system message " + std::to_string(k) + " breaks assistant/user alternation");
      break;
    }
    ++k;
  }
  if (!v.empty()) throw ValidationError(std::move(v));
}

ChatMessage opening_message(const IllnessScript& script) {
  return {Role::assistant, script.style_fields.starting_message.serialize(), Origin::scripted};
}

Opening build_opening(const IllnessScript& script) {
  Opening o;
  o.prefix.push_back({Role::system, render_short_case(script), Origin::scripted});
  o.prefix.push_back({Role::system, render_full_case(script), Origin::injected_note});
  o.prefix.push_back(opening_message(script));
  o.display_text = script.style_fields.starting_message.visible_text;
  return o;
}

PromptPlan assemble(const IllnessScript& script, std::span<const ChatMessage> history,
                    std::string_view current_user_text) {
  if (is_blank(current_user_text)) throw ValidationError({"user text must not be empty"});

  std::vector<ChatMessage> turns;
  if (history.empty()) {
    turns.push_back(opening_message(script));
  } else {
    check_history(history);
    if (history.back().role != Role::assistant)
      throw ValidationError({"history must end with an assistant message"});
    turns.assign(history.begin(), history.end());
  }
  turns.push_back({Role::user, std::string(current_user_text), Origin::participant});

  const std::size_t insert_at = note_position(turns.size());
  PromptPlan plan;
  plan.messages.reserve(turns.size() + 2);
  plan.messages.push_back({Role::system, render_short_case(script), Origin::scripted});
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i == insert_at) {
      plan.note_index = plan.messages.size();
      plan.messages.push_back({Role::system, render_full_case(script), Origin::injected_note});
    }
    plan.messages.push_back(std::move(turns[i]));
  }
  return plan;
}

std::string to_canonical_json(const PromptPlan& plan) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& m : plan.messages)
    arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return arr.dump();
}

}  // namespace vpsim
