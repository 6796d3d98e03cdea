#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vpsim {

inline constexpr std::size_t kEmotionCount = 53;
inline constexpr std::size_t kSentimentLevels = 9;
/// Every accepted vector sums to 1 within this tolerance.
inline constexpr double kSimplexTolerance = 1e-6;

/// The 53 emotion names in catalog order.
const std::array<std::string_view, kEmotionCount>& emotion_catalog() noexcept;
std::optional<std::size_t> emotion_index(std::string_view name) noexcept;

/// Probability vector over the emotion catalog. Only constructible through
/// the validating factories, so every instance lies on the simplex.
class EmotionVector {
 public:
  using Scores = std::array<double, kEmotionCount>;

  /// Requires exactly the catalog names, each score in [0,1], sum 1.
  static EmotionVector from_scores(const std::map<std::string, double>& scores);
  static EmotionVector from_array(const Scores& scores);
  static EmotionVector one_hot(std::size_t index);
  static EmotionVector one_hot(std::string_view name);
  static EmotionVector uniform();

  double operator[](std::size_t i) const { return scores_[i]; }
  double score(std::string_view name) const;
  const Scores& scores() const noexcept { return scores_; }
  std::map<std::string, double> to_map() const;

  bool operator==(const EmotionVector&) const = default;

 private:
  explicit EmotionVector(const Scores& s) : scores_(s) {}
  Scores scores_{};
};

/// Nine sentiment levels, index 0 = level 1 (extremely negative) through
/// index 8 = level 9 (extremely positive).
class SentimentDistribution {
 public:
  static SentimentDistribution from_levels(std::span<const double> levels);
  static SentimentDistribution uniform();

  const std::array<double, kSentimentLevels>& levels() const noexcept { return levels_; }
  bool operator==(const SentimentDistribution&) const = default;

 private:
  explicit SentimentDistribution(const std::array<double, kSentimentLevels>& l) : levels_(l) {}
  std::array<double, kSentimentLevels> levels_{};
};

struct WordEmotion {
  std::string token;
  std::size_t position = 0;
  EmotionVector scores = EmotionVector::uniform();
};

struct ScoredMessage {
  std::vector<WordEmotion> words;
  EmotionVector message_vector = EmotionVector::uniform();
  SentimentDistribution sentiment = SentimentDistribution::uniform();
};

// ---------------------------------------------------------------------------
// Provider contract

struct RawWordScores {
  std::string token;
  std::size_t position = 0;
  std::map<std::string, double> scores;
};

/// What a provider returns before validation.
struct RawAffectResult {
  std::vector<RawWordScores> words;
  std::map<std::string, double> message_vector;
  std::vector<double> sentiment;
};

class AffectProvider {
 public:
  virtual ~AffectProvider() = default;
  /// Throws GatewayError on transport failures.
  virtual RawAffectResult analyze(std::string_view text, std::string_view locale) = 0;
};

struct AffectValidationOptions {
  /// Rescale per-word vectors with a positive sum onto the simplex instead of
  /// rejecting them. Message vectors and sentiment are always checked strictly.
  bool renormalize_word_vectors = false;
};

/// Throws ValidationError naming the first offending vector/emotion.
ScoredMessage validate_affect_result(const RawAffectResult& raw,
                                     AffectValidationOptions options = {});

ScoredMessage score_message(std::string_view text, AffectProvider& provider,
                            std::string_view locale = "en",
                            AffectValidationOptions options = {});

// ---------------------------------------------------------------------------
// Aggregation

struct EmotionProfile {
  std::string conversation_id;
  EmotionVector vector = EmotionVector::uniform();
  std::size_t n_messages = 0;
};

/// Element-wise mean, renormalized to absorb rounding. Throws on empty input.
EmotionVector aggregate_profile(std::span<const EmotionVector> message_vectors);

using RankedEmotion = std::pair<std::string, double>;

/// Descending by score, ties in catalog order. 1 <= k <= 53.
std::vector<RankedEmotion> top_emotions(const EmotionVector& profile, std::size_t k);

using TriggerWord = std::pair<std::string, double>;

/// Tokens ranked by their peak score for `emotion`, deduplicated after case
/// folding, ties by first occurrence. Returns at most k entries.
std::vector<TriggerWord> trigger_words(std::span<const ScoredMessage> messages,
                                       std::string_view emotion, std::size_t k);

/// Argmax level in 1..9; ties go to the lower (more negative) level.
int dominant_sentiment(const SentimentDistribution& dist);

/// Mean of per-message dominant levels. Throws on empty input.
double conversation_sentiment(std::span<const ScoredMessage> messages);

// ---------------------------------------------------------------------------
// Tokenization shared by the lexicon mock and trigger-word analysis

/// Lower-cases ASCII and the Latin-1 capitals (Ä, Ö, Ü, ...) in UTF-8 text.
std::string case_fold(std::string_view text);

/// Whitespace split with leading/trailing ASCII punctuation stripped; empty
/// tokens dropped. Original case kept.
std::vector<std::string> tokenize(std::string_view text);

/// Deterministic stand-in for an external emotion model. Each token found in
/// the emotion lexicon gets all mass on its emotion; other tokens get the
/// uniform vector. The message vector is the mean of word vectors. Sentiment
/// is the normalized histogram of the mapped levels, uniform if none map.
class LexiconMockProvider final : public AffectProvider {
 public:
  LexiconMockProvider(std::map<std::string, std::string> emotion_lexicon,
                      std::map<std::string, int> sentiment_lexicon);

  RawAffectResult analyze(std::string_view text, std::string_view locale) override;

 private:
  std::map<std::string, std::size_t> emotions_;  // folded token -> catalog index
  std::map<std::string, int> sentiment_;         // folded token -> level 1..9
};

/// {"emotions": {"pain": "Pain", ...}, "sentiment": {"pain": 2, ...}}
LexiconMockProvider load_lexicon_mock(std::string_view document);

/// Remote affect provider speaking the documented JSON contract.
class HttpAffectProvider final : public AffectProvider {
 public:
  HttpAffectProvider(std::string endpoint_url, std::string credential_ref,
                     std::chrono::milliseconds timeout = std::chrono::seconds(30));

  RawAffectResult analyze(std::string_view text, std::string_view locale) override;

 private:
  std::string endpoint_url_;
  std::string credential_ref_;
  std::chrono::milliseconds timeout_;
};

std::string build_affect_request(std::string_view text, std::string_view locale);
/// Throws GatewayError(malformed_response) on shape errors.
RawAffectResult parse_affect_response(std::string_view body);

}  // namespace vpsim
