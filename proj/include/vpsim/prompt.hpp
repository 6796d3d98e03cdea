#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpsim/illness_script.hpp"

namespace vpsim {

enum class Role { system, assistant, user };
enum class Origin { scripted, model, participant, injected_note };

std::string_view to_string(Role r) noexcept;
std::string_view to_string(Origin o) noexcept;
std::optional<Role> parse_role(std::string_view text) noexcept;
std::optional<Origin> parse_origin(std::string_view text) noexcept;

struct ChatMessage {
  Role role = Role::user;
  std::string content;  // raw; assistant content keeps its annotations
  Origin origin = Origin::participant;

  bool operator==(const ChatMessage&) const = default;
};

/// Non-empty content and a role/origin pairing that is allowed.
bool is_well_formed(const ChatMessage& m) noexcept;

/// The exact message list sent to the model.
struct PromptPlan {
  std::vector<ChatMessage> messages;
  std::size_t note_index = 0;  // index into messages

  bool operator==(const PromptPlan&) const = default;
};

/// Number of non-system messages in front of the author's note. Exactly
/// min(6, n_nonsystem) non-system messages follow it; the last of them is the
/// current user message. Requires n_nonsystem >= 1.
std::size_t note_position(std::size_t n_nonsystem);

/// Throws ValidationError when the plan breaks a PromptPlan invariant.
void check_plan(const PromptPlan& plan);

/// Throws ValidationError unless `history` alternates assistant/user starting
/// with assistant and every message is well formed.
void check_history(std::span<const ChatMessage> history);

ChatMessage opening_message(const IllnessScript& script);

/// System short case + author's note + scripted first assistant message.
struct Opening {
  std::vector<ChatMessage> prefix;
  std::string display_text;
};
Opening build_opening(const IllnessScript& script);

/// Builds the plan for the next participant turn. An empty history stands for
/// a chat that so far only holds the scripted greeting. A non-empty history
/// must start and end with an assistant message.
PromptPlan assemble(const IllnessScript& script, std::span<const ChatMessage> history,
                    std::string_view current_user_text);

/// Byte-stable `[{"role":...,"content":...},...]` form.
std::string to_canonical_json(const PromptPlan& plan);

}  // namespace vpsim
