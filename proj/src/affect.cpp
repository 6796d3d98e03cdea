#include "vpsim/affect.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vpsim/errors.hpp"
#include "vpsim/gateway.hpp"

namespace vpsim {

namespace {

constexpr std::array<std::string_view, kEmotionCount> kCatalog{
    "Admiration",     "Adoration",     "Aesthetic Appreciation", "Amusement",
    "Anger",          "Annoyance",     "Anxiety",                "Awe",
    "Awkwardness",    "Boredom",       "Calmness",               "Concentration",
    "Confusion",      "Contemplation", "Contempt",               "Contentment",
    "Craving",        "Desire",        "Determination",          "Disappointment",
    "Disapproval",    "Disgust",       "Distress",               "Doubt",
    "Ecstasy",        "Embarrassment", "Empathic Pain",          "Enthusiasm",
    "Entrancement",   "Envy",          "Excitement",             "Fear",
    "Gratitude",      "Guilt",         "Horror",                 "Interest",
    "Joy",            "Love",          "Nostalgia",              "Pain",
    "Pride",          "Realization",   "Relief",                 "Romance",
    "Sadness",        "Sarcasm",       "Satisfaction",           "Shame",
    "Surprise (negative)", "Surprise (positive)", "Sympathy",    "Tiredness",
    "Triumph"};

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

template <std::size_t N>
void check_simplex(const std::array<double, N>& values, const std::string& what,
                   const auto& name_of) {
  for (std::size_t i = 0; i < N; ++i) {
    const double v = values[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw ValidationError({what + ": score for '" + name_of(i) + "' is " + fmt_double(v) +
                             ", outside [0,1]"});
  }
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  if (std::abs(sum - 1.0) > kSimplexTolerance)
    throw ValidationError({what + ": scores sum to " + fmt_double(sum) + ", expected 1"});
}

std::string emotion_name(std::size_t i) { return std::string(kCatalog[i]); }
std::string level_name(std::size_t i) { return "level " + std::to_string(i + 1); }

EmotionVector::Scores scores_from_map(const std::map<std::string, double>& scores,
                                      const std::string& what) {
  EmotionVector::Scores out{};
  std::array<bool, kEmotionCount> seen{};
  for (const auto& [name, value] : scores) {
    auto idx = emotion_index(name);
    if (!idx) throw ValidationError({what + ": unknown emotion '" + name + "'"});
    out[*idx] = value;
    seen[*idx] = true;
  }
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    if (!seen[i]) throw ValidationError({what + ": missing emotion '" + emotion_name(i) + "'"});
  }
  return out;
}

EmotionVector vector_from_map(const std::map<std::string, double>& scores, const std::string& what) {
  auto s = scores_from_map(scores, what);
  check_simplex(s, what, emotion_name);
  return EmotionVector::from_array(s);
}

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

}  // namespace

const std::array<std::string_view, kEmotionCount>& emotion_catalog() noexcept { return kCatalog; }

std::optional<std::size_t> emotion_index(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kCatalog.size(); ++i)
    if (kCatalog[i] == name) return i;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

EmotionVector EmotionVector::from_scores(const std::map<std::string, double>& scores) {
  return vector_from_map(scores, "emotion vector");
}

EmotionVector EmotionVector::from_array(const Scores& scores) {
  check_simplex(scores, "emotion vector", emotion_name);
  return EmotionVector(scores);
}

EmotionVector EmotionVector::one_hot(std::size_t index) {
  if (index >= kEmotionCount) throw Error("one_hot: index out of range");
  Scores s{};
  s[index] = 1.0;
  return EmotionVector(s);
}

EmotionVector EmotionVector::one_hot(std::string_view name) {
  auto idx = emotion_index(name);
  if (!idx) throw ValidationError({"unknown emotion '" + std::string(name) + "'"});
  return one_hot(*idx);
}

EmotionVector EmotionVector::uniform() {
  Scores s;
  s.fill(1.0 / static_cast<double>(kEmotionCount));
  return EmotionVector(s);
}

double EmotionVector::score(std::string_view name) const {
  auto idx = emotion_index(name);
  if (!idx) throw ValidationError({"unknown emotion '" + std::string(name) + "'"});
  return scores_[*idx];
}

std::map<std::string, double> EmotionVector::to_map() const {
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < kEmotionCount; ++i) m.emplace(kCatalog[i], scores_[i]);
  return m;
}

SentimentDistribution SentimentDistribution::from_levels(std::span<const double> levels) {
  if (levels.size() != kSentimentLevels)
    throw ValidationError({"sentiment: expected 9 levels, got " + std::to_string(levels.size())});
  std::array<double, kSentimentLevels> a{};
  std::copy(levels.begin(), levels.end(), a.begin());
  check_simplex(a, "sentiment", level_name);
  return SentimentDistribution(a);
}

SentimentDistribution SentimentDistribution::uniform() {
  std::array<double, kSentimentLevels> a;
  a.fill(1.0 / static_cast<double>(kSentimentLevels));
  return SentimentDistribution(a);
}

// ---------------------------------------------------------------------------

ScoredMessage validate_affect_result(const RawAffectResult& raw, AffectValidationOptions options) {
  ScoredMessage out;
  std::set<std::size_t> positions;
  for (const auto& w : raw.words) {
    const std::string what = "word '" + w.token + "'@" + std::to_string(w.position);
    if (!positions.insert(w.position).second)
      throw ValidationError({what + ": duplicate position"});
    auto scores = scores_from_map(w.scores, what);
    if (options.renormalize_word_vectors) {
      const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
      const bool in_range = std::all_of(scores.begin(), scores.end(),
                                        [](double v) { return std::isfinite(v) && v >= 0.0; });
      if (in_range && sum > 0.0)
        for (auto& v : scores) v /= sum;
    }
    check_simplex(scores, what, emotion_name);
    out.words.push_back({w.token, w.position, EmotionVector::from_array(scores)});
  }
  out.message_vector = vector_from_map(raw.message_vector, "message vector");
  out.sentiment = SentimentDistribution::from_levels(raw.sentiment);
  return out;
}

ScoredMessage score_message(std::string_view text, AffectProvider& provider,
                            std::string_view locale, AffectValidationOptions options) {
  if (text.empty()) throw ValidationError({"score_message: text must not be empty"});
  return validate_affect_result(provider.analyze(text, locale), options);
}

// ---------------------------------------------------------------------------

EmotionVector aggregate_profile(std::span<const EmotionVector> vectors) {
  if (vectors.empty()) throw Error("aggregate_profile: no message vectors");
  EmotionVector::Scores acc{};
  for (const auto& v : vectors)
    for (std::size_t i = 0; i < kEmotionCount; ++i) acc[i] += v[i];
  const double n = static_cast<double>(vectors.size());
  for (auto& a : acc) a /= n;
  const double sum = std::accumulate(acc.begin(), acc.end(), 0.0);
  for (auto& a : acc) a /= sum;
  return EmotionVector::from_array(acc);
}

std::vector<RankedEmotion> top_emotions(const EmotionVector& profile, std::size_t k) {
  if (k < 1 || k > kEmotionCount) throw Error("top_emotions: k must be within 1..53");
  std::vector<std::size_t> order(kEmotionCount);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return profile[a] > profile[b]; });
  std::vector<RankedEmotion> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(kCatalog[order[i]], profile[order[i]]);
  return out;
}

std::vector<TriggerWord> trigger_words(std::span<const ScoredMessage> messages,
                                       std::string_view emotion, std::size_t k) {
  const auto idx = emotion_index(emotion);
  if (!idx) throw ValidationError({"unknown emotion '" + std::string(emotion) + "'"});

  // First-occurrence order, peak score per folded token.
  std::vector<TriggerWord> peaks;
  std::map<std::string, std::size_t> slot;
  for (const auto& m : messages) {
    for (const auto& w : m.words) {
      auto token = case_fold(w.token);
      const double s = w.scores[*idx];
      if (auto it = slot.find(token); it != slot.end()) {
        peaks[it->second].second = std::max(peaks[it->second].second, s);
      } else {
        slot.emplace(token, peaks.size());
        peaks.emplace_back(std::move(token), s);
      }
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (peaks.size() > k) peaks.resize(k);
  return peaks;
}

int dominant_sentiment(const SentimentDistribution& dist) {
  const auto& l = dist.levels();
  std::size_t best = 0;
  for (std::size_t i = 1; i < l.size(); ++i)
    if (l[i] > l[best]) best = i;
  return static_cast<int>(best) + 1;
}

double conversation_sentiment(std::span<const ScoredMessage> messages) {
  if (messages.empty()) throw Error("conversation_sentiment: no messages");
  double total = 0.0;
  for (const auto& m : messages) total += dominant_sentiment(m.sentiment);
  return total / static_cast<double>(messages.size());
}

// ---------------------------------------------------------------------------

std::string case_fold(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      out += static_cast<char>(std::tolower(c));
    } else if (c == 0xC3 && i + 1 < text.size()) {
      // U+00C0..U+00DE capitals (except U+00D7 multiplication sign) fold +0x20.
      auto next = static_cast<unsigned char>(text[i + 1]);
      if (next >= 0x80 && next <= 0x9E && next != 0x97) next += 0x20;
      out += static_cast<char>(c);
      out += static_cast<char>(next);
      ++i;
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && is_ascii_punct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_ascii_punct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (e > b) tokens.emplace_back(text.substr(b, e - b));
    i = j;
  }
  return tokens;
}

LexiconMockProvider::LexiconMockProvider(std::map<std::string, std::string> emotion_lexicon,
                                         std::map<std::string, int> sentiment_lexicon) {
  if (emotion_lexicon.empty() && sentiment_lexicon.empty())
    throw Error("lexicon mock: lexicons must not both be empty");
  for (const auto& [token, emotion] : emotion_lexicon) {
    auto idx = emotion_index(emotion);
    if (!idx) throw ValidationError({"lexicon: unknown emotion '" + emotion + "' for '" + token + "'"});
    emotions_[case_fold(token)] = *idx;
  }
  for (const auto& [token, level] : sentiment_lexicon) {
    if (level < 1 || level > 9)
      throw ValidationError({"lexicon: sentiment level for '" + token + "' must be within 1..9"});
    sentiment_[case_fold(token)] = level;
  }
}

RawAffectResult LexiconMockProvider::analyze(std::string_view text, std::string_view) {
  RawAffectResult out;
  const auto tokens = tokenize(text);
  EmotionVector::Scores mean{};
  std::array<double, kSentimentLevels> histogram{};
  double mapped_levels = 0.0;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const auto folded = case_fold(tokens[pos]);
    const auto it = emotions_.find(folded);
    const auto vec = it != emotions_.end() ? EmotionVector::one_hot(it->second) : EmotionVector::uniform();
    for (std::size_t i = 0; i < kEmotionCount; ++i) mean[i] += vec[i];
    out.words.push_back({tokens[pos], pos, vec.to_map()});
    if (auto s = sentiment_.find(folded); s != sentiment_.end()) {
      histogram[static_cast<std::size_t>(s->second - 1)] += 1.0;
      mapped_levels += 1.0;
    }
  }
  if (tokens.empty()) {
    out.message_vector = EmotionVector::uniform().to_map();
  } else {
    for (auto& m : mean) m /= static_cast<double>(tokens.size());
    for (std::size_t i = 0; i < kEmotionCount; ++i) out.message_vector.emplace(kCatalog[i], mean[i]);
  }
  if (mapped_levels > 0) {
    for (auto h : histogram) out.sentiment.push_back(h / mapped_levels);
  } else {
    const auto u = SentimentDistribution::uniform().levels();
    out.sentiment.assign(u.begin(), u.end());
  }
  return out;
}

LexiconMockProvider load_lexicon_mock(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("lexicon: ") + e.what());
  }
  std::map<std::string, std::string> emotions;
  std::map<std::string, int> sentiment;
  try {
    if (doc.contains("emotions")) emotions = doc.at("emotions").get<std::map<std::string, std::string>>();
    if (doc.contains("sentiment")) sentiment = doc.at("sentiment").get<std::map<std::string, int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("lexicon: ") + e.what());
  }
  return LexiconMockProvider(std::move(emotions), std::move(sentiment));
}

// ---------------------------------------------------------------------------
// Wire contract

std::string build_affect_request(std::string_view text, std::string_view locale) {
  nlohmann::ordered_json body;
  body["text"] = text;
  body["locale"] = locale;
  return body.dump();
}

RawAffectResult parse_affect_response(std::string_view body) {
  using GE = GatewayError;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw GE(GatewayErrorKind::malformed_response, std::string("affect response: ") + e.what());
  }
  RawAffectResult out;
  try {
    for (const auto& w : doc.at("words")) {
      out.words.push_back({w.at("token").get<std::string>(), w.at("position").get<std::size_t>(),
                           w.at("scores").get<std::map<std::string, double>>()});
    }
    out.message_vector = doc.at("message_vector").get<std::map<std::string, double>>();
    out.sentiment = doc.at("sentiment").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw GE(GatewayErrorKind::malformed_response, std::string("affect response: ") + e.what());
  }
  return out;
}

}  // namespace vpsim
