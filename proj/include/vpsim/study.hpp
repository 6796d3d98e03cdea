#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vpsim/affect.hpp"
#include "vpsim/conversation.hpp"
#include "vpsim/satir_style.hpp"
#include "vpsim/stats.hpp"
#include "vpsim/timestamp.hpp"

namespace vpsim {

enum class ItemKind { likert5, single_choice, multi_select, free_text };

std::string_view to_string(ItemKind k) noexcept;
std::optional<ItemKind> parse_item_kind(std::string_view text) noexcept;

struct ItemOption {
  std::string id;     // stable across locales
  std::string label;  // localized
  bool operator==(const ItemOption&) const = default;
};

/// Shown only when `item` was answered with one of `options`.
struct ItemCondition {
  std::string item;
  std::vector<std::string> options;
  bool operator==(const ItemCondition&) const = default;
};

struct Item {
  std::string id;
  ItemKind kind = ItemKind::likert5;
  std::string prompt;
  std::vector<ItemOption> options;
  std::optional<ItemCondition> conditional_on;
  /// Likert items whose first option is the positive pole are reverse-coded
  /// so that 5 is always the most positive answer.
  bool positive_first = false;
  /// Number of ratings collected for this item (e.g. five question/answer
  /// pairs rated for realism).
  int repeat = 1;

  /// 1..5 code of a likert option, 5 = most positive.
  std::optional<int> likert_code(std::string_view option_id) const;
  const ItemOption* option(std::string_view option_id) const;

  bool operator==(const Item&) const = default;
};

struct Questionnaire {
  std::string version;
  std::string locale;
  std::vector<Item> items;

  const Item* item(std::string_view id) const;
  bool operator==(const Questionnaire&) const = default;
};

/// Throws ParseError (malformed) or ValidationError (schema violations named
/// per item).
Questionnaire load_questionnaire(std::string_view document);
Questionnaire load_questionnaire_file(const std::string& path);
std::string serialize_questionnaire(const Questionnaire& q);

/// Item ids of the AI-attitude block.
inline constexpr std::array<std::string_view, 3> kAiFamiliarityItems{"ai_trust", "ai_excitement",
                                                                     "ai_usage"};
inline constexpr std::string_view kStyleItem = "satir_style";
inline constexpr std::string_view kAdjectiveItem = "adjectives";
inline constexpr std::string_view kNoneOfAbove = "none_of_above";

// ---------------------------------------------------------------------------

struct Skipped {
  bool operator==(const Skipped&) const = default;
};

/// likert5 -> int (or one int per repeat); single_choice -> option id;
/// multi_select -> option ids; free_text -> text.
using AnswerValue =
    std::variant<Skipped, int, std::vector<int>, std::string, std::vector<std::string>>;

struct QuestionnaireResponse {
  std::string session_id;
  std::map<std::string, AnswerValue> answers;
  Timestamp submitted_at{};
  bool operator==(const QuestionnaireResponse&) const = default;
};

/// Empty iff the response is complete and every answer is admissible.
std::vector<std::string> validate_response(const Questionnaire& q, const QuestionnaireResponse& r);

/// JSON object {item_id: value | null} <-> answers, typed per item kind.
QuestionnaireResponse response_from_json(const Questionnaire& q, std::string_view session_id,
                                         std::string_view answers_json, Timestamp submitted_at);
std::string answers_to_json(const QuestionnaireResponse& r);

// ---------------------------------------------------------------------------

/// Adjective -> style for the four non-congruent styles.
struct AdjectiveMap {
  std::map<std::string, SatirStyle> entries;

  /// Throws ValidationError unless every adjective of `q`'s adjective item is
  /// mapped to a non-congruent style and nothing else is.
  void check(const Questionnaire& q) const;
};

AdjectiveMap load_adjective_map(std::string_view document);

/// Mean +- sample std of likert codes for an item, flattening repeats and
/// ignoring skips. Throws when there is no data.
MeanStd likert_stats(std::string_view item_id, std::span<const QuestionnaireResponse> responses);

struct StyleIdentification {
  std::map<std::string, int> counts;  // six answer option ids
  int total = 0;
  double correct_fraction = 0.0;
};

StyleIdentification style_identification(std::span<const QuestionnaireResponse> responses,
                                         SatirStyle true_style);

struct AdjectivePrecision {
  std::map<SatirStyle, double> percentages;  // appeaser, accuser, rationalizer, distractor
  std::map<SatirStyle, int> counts;
  int total = 0;
  double precision = 0.0;  // percentage for the target style
};

/// Share of all selected adjectives mapping to each style, in percent.
AdjectivePrecision adjective_precision(std::span<const QuestionnaireResponse> responses,
                                       SatirStyle target_style, const AdjectiveMap& map);

/// likert_stats over the AI-attitude items; items without data are omitted.
std::map<std::string, MeanStd> ai_familiarity_stats(std::span<const QuestionnaireResponse> responses);

// ---------------------------------------------------------------------------

/// Affect results for one session, as stored by the service.
struct SessionAffect {
  std::string session_id;
  std::vector<ScoredMessage> messages;  // VP messages in transcript order
  EmotionVector profile = EmotionVector::uniform();
  double sentiment = 0.0;
};

struct ExportInput {
  std::vector<Session> sessions;
  std::vector<QuestionnaireResponse> responses;
  std::vector<SessionAffect> affect;
  const Questionnaire* questionnaire = nullptr;  // for column order; may be null
  const AdjectiveMap* adjective_map = nullptr;   // adjective metrics skipped when null
};

/// Writes sessions.csv, responses.csv, metrics.json and transcripts/<id>.jsonl
/// under `dir` (created if needed). Output is a pure function of the input.
/// Returns the written paths relative to `dir`, sorted.
std::vector<std::string> export_dataset(const ExportInput& input, const std::filesystem::path& dir);

/// The metrics.json document on its own.
std::string compute_metrics_json(const ExportInput& input);

}  // namespace vpsim
