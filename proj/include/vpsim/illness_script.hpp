#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpsim/annotation.hpp"
#include "vpsim/satir_style.hpp"

namespace vpsim {

enum class Gender { male, female, diverse };

std::string_view to_string(Gender g) noexcept;
/// Single-letter code used inside prompts: m / f / d.
std::string_view gender_code(Gender g) noexcept;
std::optional<Gender> parse_gender(std::string_view text) noexcept;

/// Locales with shipped fixtures.
inline constexpr std::string_view kLocaleEn = "en";
inline constexpr std::string_view kLocaleDe = "de";
bool is_supported_locale(std::string_view locale) noexcept;

struct CategoryDefinition {
  std::string key;
  std::map<std::string, std::string> labels;  // locale -> label
  bool placeholder = false;

  /// Label for `locale`, falling back to English, then to the key.
  std::string label(std::string_view locale) const;
};

/// The 45 case categories in author's-note order, plus the keys that may be
/// left blank.
struct CategoryManifest {
  static constexpr std::size_t kRequiredCount = 45;

  std::vector<CategoryDefinition> categories;
  std::vector<std::string> allowed_blank;

  bool contains(std::string_view key) const;
  bool is_allowed_blank(std::string_view key) const;

  /// Throws ValidationError when the manifest's own invariants fail.
  void check() const;
};

CategoryManifest load_manifest(std::string_view document);
CategoryManifest load_manifest_file(const std::string& path);

struct Persona {
  std::string first_name;
  std::string last_name;
  std::int64_t age = 0;
  Gender gender = Gender::male;
  std::string occupation;

  std::string full_name() const { return first_name + " " + last_name; }
  bool operator==(const Persona&) const = default;
};

struct AvoidedTopic {
  std::string topic;
  std::string reaction;
  bool operator==(const AvoidedTopic&) const = default;
};

/// The six fields that carry the communication style.
struct StyleFields {
  std::string character_features;
  std::string mood;
  std::vector<AvoidedTopic> topics_to_avoid;
  AnnotatedContent starting_message;
  std::string communicativeness;
  std::string adverse_response;
  bool operator==(const StyleFields&) const = default;
};

/// Conditional answers that keep the patient skeptical of psychological
/// explanations until feelings are validated and the symptom/life-event link
/// is explained. All three answers must appear verbatim in communicativeness.
struct StubbornnessRule {
  std::string skeptical_response;
  std::string hesitant_acceptance;
  std::string refusal_response;
  std::string condition_note;
  bool operator==(const StubbornnessRule&) const = default;
};

/// Prompting strategies that were tried and dropped. Stored for reference,
/// never rendered.
struct DisabledOptions {
  std::vector<std::string> canned_negative_answers;
  std::string nonverbal_cue_prompt;
  bool operator==(const DisabledOptions&) const = default;
};

struct IllnessScript {
  std::string script_id;
  SatirStyle style = SatirStyle::accuser;
  std::string locale;
  Persona persona;
  /// Free-form categories keyed by manifest key. Categories backed by the
  /// persona or style fields are not stored here; see category_text().
  std::map<std::string, std::string> categories;
  StyleFields style_fields;
  StubbornnessRule stubbornness;
  DisabledOptions optional_disabled;

  /// Manifest the script was validated against; drives render order/labels.
  std::shared_ptr<const CategoryManifest> manifest;

  /// Text of any manifest category, whether stored free-form or derived from
  /// the structured fields. nullopt when absent.
  std::optional<std::string> category_text(std::string_view key) const;

  /// Field-for-field equality, ignoring the manifest pointer.
  bool operator==(const IllnessScript& other) const;
};

/// Manifest keys whose text derives from Persona / StyleFields.
bool is_structured_category(std::string_view key) noexcept;

/// Empty report iff every invariant holds against `manifest`.
std::vector<std::string> validate_script(const IllnessScript& script,
                                         const CategoryManifest& manifest);

/// Parses and validates. Throws ParseError for malformed documents and
/// ValidationError (listing every violation) for invariant failures.
IllnessScript load_script(std::string_view document,
                          std::shared_ptr<const CategoryManifest> manifest);
IllnessScript load_script_file(const std::string& path,
                               std::shared_ptr<const CategoryManifest> manifest);

/// Document form accepted by load_script (pretty-printed JSON).
std::string serialize_script(const IllnessScript& script);

/// Condensed case for the initial system message.
std::string render_short_case(const IllnessScript& script);

/// Author's-note body: every manifest category, in manifest order, with labels.
std::string render_full_case(const IllnessScript& script);

}  // namespace vpsim
