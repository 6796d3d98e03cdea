#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vpsim {

/// Hidden annotation carried in assistant text. The model sees it; the
/// participant never does.
struct Annotation {
  enum class Kind { emotion_tag, thought_block };

  Kind kind = Kind::emotion_tag;
  std::string payload;

  bool operator==(const Annotation&) const = default;
};

/// Assistant text split into its hidden annotations and the visible remainder.
struct AnnotatedContent {
  std::vector<Annotation> annotations;
  std::string visible_text;

  /// Canonical raw form: annotations separated by single spaces, then the
  /// visible text. `<tormented> <Thoughts: "..."> Hello!`
  std::string serialize() const;

  bool operator==(const AnnotatedContent&) const = default;
};

inline constexpr std::string_view kThoughtDelimiter = "<Thoughts:";

/// Leading-prefix grammar: a run of `<...>` segments at the start of the text
/// becomes annotations; segments starting with `Thoughts:` are thought blocks
/// (surrounding quotes removed), all others emotion tags. A `<` after the
/// prefix is literal text, except for the thought delimiter, which is always
/// extracted so a thought can never reach the participant.
///
/// Throws ParseError on an unterminated or empty annotation.
AnnotatedContent parse_annotations(std::string_view raw);

/// Visible text only. Idempotent.
std::string strip_for_display(std::string_view raw);

}  // namespace vpsim
