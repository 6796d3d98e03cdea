#include "vpsim/illness_script.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vpsim/errors.hpp"

namespace vpsim {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kScriptFormat = "vpsim-illness-script/1";

constexpr std::array<std::string_view, 11> kStructuredKeys{
    "first_name", "last_name", "age", "gender", "job", "character_features",
    "mood", "topics_to_avoid", "starting_message", "communicativeness",
    "adverse_response"};

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view document, std::string_view what) {
  try {
    return json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

// Typed field access that reports the dotted path on type mismatch.
std::string get_string(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return {};
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ParseError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

const json& get_object(const json& obj, const char* key, const std::string& path) {
  static const json empty = json::object();
  if (!obj.contains(key)) return empty;
  const auto& v = obj.at(key);
  if (!v.is_object()) throw ParseError(path + "." + key + ": expected an object");
  return v;
}

std::string gender_word(Gender g, std::string_view locale) {
  if (locale == kLocaleDe) {
    switch (g) {
      case Gender::male: return "männlich";
      case Gender::female: return "weiblich";
      case Gender::diverse: return "divers";
    }
  }
  return std::string(to_string(g));
}

std::string style_label(SatirStyle s, std::string_view locale) {
  if (locale == kLocaleDe) {
    switch (s) {
      case SatirStyle::appeaser: return "Beschwichtiger";
      case SatirStyle::accuser: return "Ankläger";
      case SatirStyle::rationalizer: return "Rationalisierer";
      case SatirStyle::distractor: return "Ablenker";
      case SatirStyle::congruent: return "kongruent";
    }
  }
  return std::string(to_string(s));
}

std::string render_topics(const std::vector<AvoidedTopic>& topics) {
  std::string out;
  for (const auto& t : topics) {
    if (!out.empty()) out += "; ";
    out += t.topic;
    if (!t.reaction.empty()) out += " (" + t.reaction + ")";
  }
  return out;
}

}  // namespace

std::string_view to_string(Gender g) noexcept {
  switch (g) {
    case Gender::male: return "male";
    case Gender::female: return "female";
    case Gender::diverse: return "diverse";
  }
  return "unknown";
}

std::string_view gender_code(Gender g) noexcept {
  switch (g) {
    case Gender::male: return "m";
    case Gender::female: return "f";
    case Gender::diverse: return "d";
  }
  return "?";
}

std::optional<Gender> parse_gender(std::string_view text) noexcept {
  for (auto g : {Gender::male, Gender::female, Gender::diverse}) {
    if (to_string(g) == text || gender_code(g) == text) return g;
  }
  return std::nullopt;
}

bool is_supported_locale(std::string_view locale) noexcept {
  return locale == kLocaleEn || locale == kLocaleDe;
}

bool is_structured_category(std::string_view key) noexcept {
  return std::find(kStructuredKeys.begin(), kStructuredKeys.end(), key) != kStructuredKeys.end();
}

// ---------------------------------------------------------------------------
// Manifest

std::string CategoryDefinition::label(std::string_view locale) const {
  if (auto it = labels.find(std::string(locale)); it != labels.end()) return it->second;
  if (auto it = labels.find("en"); it != labels.end()) return it->second;
  return key;
}

bool CategoryManifest::contains(std::string_view key) const {
  return std::any_of(categories.begin(), categories.end(),
                     [&](const auto& c) { return c.key == key; });
}

bool CategoryManifest::is_allowed_blank(std::string_view key) const {
  return std::find(allowed_blank.begin(), allowed_blank.end(), key) != allowed_blank.end();
}

void CategoryManifest::check() const {
  std::vector<std::string> violations;
  if (categories.size() != kRequiredCount) {
    violations.push_back("manifest must list exactly " + std::to_string(kRequiredCount) +
                         " categories, found " + std::to_string(categories.size()));
  }
  std::set<std::string> seen;
  for (const auto& c : categories) {
    if (c.key.empty()) violations.push_back("manifest contains an empty key");
    if (!seen.insert(c.key).second) violations.push_back("duplicate manifest key '" + c.key + "'");
  }
  for (const auto& k : allowed_blank) {
    if (!seen.contains(k)) violations.push_back("allowed_blank key '" + k + "' is not a required key");
  }
  if (!violations.empty()) throw ValidationError(std::move(violations));
}

CategoryManifest load_manifest(std::string_view document) {
  const json doc = parse_json(document, "manifest");
  if (!doc.is_object() || !doc.contains("categories") || !doc.at("categories").is_array())
    throw ParseError("manifest: expected an object with a 'categories' array");

  CategoryManifest m;
  for (const auto& entry : doc.at("categories")) {
    if (!entry.is_object()) throw ParseError("manifest: category entries must be objects");
    CategoryDefinition def;
    def.key = get_string(entry, "key", "categories[]");
    if (entry.contains("label")) {
      const auto& label = entry.at("label");
      if (label.is_string()) {
        def.labels["en"] = label.get<std::string>();
      } else if (label.is_object()) {
        for (const auto& [loc, text] : label.items()) {
          if (!text.is_string()) throw ParseError("manifest: label for '" + def.key + "' must be text");
          def.labels[loc] = text.get<std::string>();
        }
      } else {
        throw ParseError("manifest: label for '" + def.key + "' must be text or a locale map");
      }
    }
    def.placeholder = entry.value("placeholder", false);
    m.categories.push_back(std::move(def));
  }
  if (doc.contains("allowed_blank")) {
    for (const auto& k : doc.at("allowed_blank")) {
      if (!k.is_string()) throw ParseError("manifest: allowed_blank entries must be strings");
      m.allowed_blank.push_back(k.get<std::string>());
    }
  }
  m.check();
  return m;
}

CategoryManifest load_manifest_file(const std::string& path) {
  return load_manifest(read_file(path));
}

// ---------------------------------------------------------------------------
// Script

std::optional<std::string> IllnessScript::category_text(std::string_view key) const {
  if (key == "first_name") return persona.first_name;
  if (key == "last_name") return persona.last_name;
  if (key == "age") return std::to_string(persona.age);
  if (key == "gender") return gender_word(persona.gender, locale);
  if (key == "job") return persona.occupation;
  if (key == "character_features") return style_fields.character_features;
  if (key == "mood") return style_fields.mood;
  if (key == "topics_to_avoid") return render_topics(style_fields.topics_to_avoid);
  if (key == "starting_message") return style_fields.starting_message.serialize();
  if (key == "communicativeness") return style_fields.communicativeness;
  if (key == "adverse_response") return style_fields.adverse_response;
  if (auto it = categories.find(std::string(key)); it != categories.end()) return it->second;
  return std::nullopt;
}

bool IllnessScript::operator==(const IllnessScript& o) const {
  return script_id == o.script_id && style == o.style && locale == o.locale &&
         persona == o.persona && categories == o.categories &&
         style_fields == o.style_fields && stubbornness == o.stubbornness &&
         optional_disabled == o.optional_disabled;
}

std::vector<std::string> validate_script(const IllnessScript& script,
                                         const CategoryManifest& manifest) {
  std::vector<std::string> v;
  if (script.script_id.empty()) v.emplace_back("script_id must not be empty");
  if (!is_supported_locale(script.locale))
    v.push_back("locale '" + script.locale + "' is not supported");
  if (script.persona.age <= 0) v.emplace_back("age must be positive");

  for (const auto& def : manifest.categories) {
    auto text = script.category_text(def.key);
    if (!text) {
      v.push_back("missing category '" + def.key + "'");
    } else if (is_blank(*text) && !manifest.is_allowed_blank(def.key)) {
      v.push_back("blank category '" + def.key + "'");
    }
  }
  for (const auto& [key, _] : script.categories) {
    if (is_structured_category(key)) {
      v.push_back("category '" + key + "' must be given through persona/style_fields");
    } else if (!manifest.contains(key)) {
      v.push_back("unknown category '" + key + "'");
    }
  }

  if (is_blank(script.style_fields.starting_message.visible_text))
    v.emplace_back("starting_message: visible text is empty");

  const std::pair<const char*, const std::string*> templates[] = {
      {"skeptical_response", &script.stubbornness.skeptical_response},
      {"hesitant_acceptance", &script.stubbornness.hesitant_acceptance},
      {"refusal_response", &script.stubbornness.refusal_response}};
  for (const auto& [name, text] : templates) {
    if (is_blank(*text)) {
      v.push_back(std::string("stubbornness.") + name + " is empty");
    } else if (script.style_fields.communicativeness.find(*text) == std::string::npos) {
      v.push_back(std::string("communicativeness is missing the stubbornness.") + name +
                  " template");
    }
  }
  const auto& s = script.stubbornness;
  if (!s.skeptical_response.empty() &&
      (s.skeptical_response == s.hesitant_acceptance || s.skeptical_response == s.refusal_response))
    v.emplace_back("stubbornness templates must be mutually distinct");
  else if (!s.hesitant_acceptance.empty() && s.hesitant_acceptance == s.refusal_response)
    v.emplace_back("stubbornness templates must be mutually distinct");
  return v;
}

IllnessScript load_script(std::string_view document,
                          std::shared_ptr<const CategoryManifest> manifest) {
  if (!manifest) throw Error("load_script: no manifest");
  const json doc = parse_json(document, "script");
  if (!doc.is_object()) throw ParseError("script: expected a JSON object");
  if (doc.contains("format") && doc.at("format") != kScriptFormat)
    throw ParseError("script: unsupported format " + doc.at("format").dump());

  IllnessScript s;
  std::vector<std::string> violations;

  s.script_id = get_string(doc, "script_id", "script");
  const auto style_text = get_string(doc, "style", "script");
  if (auto style = parse_style(style_text)) {
    s.style = *style;
  } else {
    violations.push_back("unknown style '" + style_text + "'");
  }
  s.locale = get_string(doc, "locale", "script");

  const auto& persona = get_object(doc, "persona", "script");
  s.persona.first_name = get_string(persona, "first_name", "persona");
  s.persona.last_name = get_string(persona, "last_name", "persona");
  s.persona.occupation = get_string(persona, "occupation", "persona");
  if (persona.contains("age")) {
    if (!persona.at("age").is_number_integer()) throw ParseError("persona.age: expected an integer");
    s.persona.age = persona.at("age").get<std::int64_t>();
  }
  const auto gender_text = get_string(persona, "gender", "persona");
  if (auto g = parse_gender(gender_text)) {
    s.persona.gender = *g;
  } else {
    violations.push_back("persona.gender '" + gender_text + "' is not one of male/female/diverse");
  }

  const auto& style = get_object(doc, "style_fields", "script");
  s.style_fields.character_features = get_string(style, "character_features", "style_fields");
  s.style_fields.mood = get_string(style, "mood", "style_fields");
  s.style_fields.communicativeness = get_string(style, "communicativeness", "style_fields");
  s.style_fields.adverse_response = get_string(style, "adverse_response", "style_fields");
  if (style.contains("topics_to_avoid")) {
    const auto& topics = style.at("topics_to_avoid");
    if (!topics.is_array()) throw ParseError("style_fields.topics_to_avoid: expected a list");
    for (const auto& t : topics) {
      if (!t.is_object()) throw ParseError("style_fields.topics_to_avoid[]: expected an object");
      s.style_fields.topics_to_avoid.push_back(
          {get_string(t, "topic", "topics_to_avoid[]"), get_string(t, "reaction", "topics_to_avoid[]")});
    }
  }
  try {
    s.style_fields.starting_message =
        parse_annotations(get_string(style, "starting_message", "style_fields"));
  } catch (const ParseError& e) {
    violations.push_back(std::string("starting_message: ") + e.what());
  }

  const auto& stub = get_object(doc, "stubbornness", "script");
  s.stubbornness.skeptical_response = get_string(stub, "skeptical_response", "stubbornness");
  s.stubbornness.hesitant_acceptance = get_string(stub, "hesitant_acceptance", "stubbornness");
  s.stubbornness.refusal_response = get_string(stub, "refusal_response", "stubbornness");
  s.stubbornness.condition_note = get_string(stub, "condition_note", "stubbornness");

  for (const auto& [key, value] : get_object(doc, "categories", "script").items()) {
    if (!value.is_string()) throw ParseError("categories." + key + ": expected a string");
    s.categories[key] = value.get<std::string>();
  }

  const auto& disabled = get_object(doc, "optional_disabled", "script");
  if (disabled.contains("canned_negative_answers")) {
    for (const auto& a : disabled.at("canned_negative_answers")) {
      if (!a.is_string()) throw ParseError("optional_disabled.canned_negative_answers: expected strings");
      s.optional_disabled.canned_negative_answers.push_back(a.get<std::string>());
    }
  }
  s.optional_disabled.nonverbal_cue_prompt =
      get_string(disabled, "nonverbal_cue_prompt", "optional_disabled");

  auto more = validate_script(s, *manifest);
  // A starting message that failed to parse also reads as "visible text is
  // empty"; the parse error already names the problem.
  if (!violations.empty()) {
    std::erase(more, std::string("starting_message: visible text is empty"));
  }
  violations.insert(violations.end(), more.begin(), more.end());
  if (!violations.empty()) {
    throw ValidationError("script '" + s.script_id + "' is invalid: " +
                              [&] {
                                std::string j;
                                for (const auto& x : violations) j += (j.empty() ? "" : "; ") + x;
                                return j;
                              }(),
                          std::move(violations));
  }
  s.manifest = std::move(manifest);
  return s;
}

IllnessScript load_script_file(const std::string& path,
                               std::shared_ptr<const CategoryManifest> manifest) {
  return load_script(read_file(path), std::move(manifest));
}

std::string serialize_script(const IllnessScript& s) {
  ordered_json doc;
  doc["format"] = kScriptFormat;
  doc["script_id"] = s.script_id;
  doc["style"] = to_string(s.style);
  doc["locale"] = s.locale;
  doc["persona"] = {{"first_name", s.persona.first_name},
                    {"last_name", s.persona.last_name},
                    {"age", s.persona.age},
                    {"gender", to_string(s.persona.gender)},
                    {"occupation", s.persona.occupation}};
  ordered_json topics = ordered_json::array();
  for (const auto& t : s.style_fields.topics_to_avoid)
    topics.push_back({{"topic", t.topic}, {"reaction", t.reaction}});
  doc["style_fields"] = {{"character_features", s.style_fields.character_features},
                         {"mood", s.style_fields.mood},
                         {"topics_to_avoid", topics},
                         {"starting_message", s.style_fields.starting_message.serialize()},
                         {"communicativeness", s.style_fields.communicativeness},
                         {"adverse_response", s.style_fields.adverse_response}};
  doc["stubbornness"] = {{"skeptical_response", s.stubbornness.skeptical_response},
                         {"hesitant_acceptance", s.stubbornness.hesitant_acceptance},
                         {"refusal_response", s.stubbornness.refusal_response},
                         {"condition_note", s.stubbornness.condition_note}};
  ordered_json cats = ordered_json::object();
  // Manifest order when available keeps diffs of serialized fixtures readable.
  if (s.manifest) {
    for (const auto& def : s.manifest->categories)
      if (auto it = s.categories.find(def.key); it != s.categories.end()) cats[it->first] = it->second;
  }
  for (const auto& [k, v] : s.categories)
    if (!cats.contains(k)) cats[k] = v;
  doc["categories"] = cats;
  doc["optional_disabled"] = {
      {"canned_negative_answers", s.optional_disabled.canned_negative_answers},
      {"nonverbal_cue_prompt", s.optional_disabled.nonverbal_cue_prompt}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_short_case(const IllnessScript& s) {
  const auto text = [&](std::string_view key) { return s.category_text(key).value_or(""); };
  const auto name = s.persona.full_name();
  const auto g = gender_code(s.persona.gender);
  std::ostringstream out;
  if (s.locale == kLocaleDe) {
    out << "Ich möchte, dass du die Rolle von " << name << " (Rolle: Patient, Geschlecht:" << g
        << ") spielst und dich mit dem Nutzer (Rolle: Psychologe, Geschlecht unbekannt) "
           "unterhältst. Du assistierst nicht, sondern verfolgst ein klares Ziel für dieses "
           "Gespräch.\n"
        << "Ziel: " << text("goal_of_visit") << "\n"
        << "Symptome: " << text("description_of_current_problems") << "\n"
        << "Hintergrund: " << s.persona.occupation << ", " << s.persona.age << " Jahre. "
        << text("situation") << "\n"
        << "Kommunikationstyp: " << style_label(s.style, s.locale) << ". " << s.style_fields.mood;
  } else {
    out << "I want you to play the role of " << name << " (role: patient, gender:" << g
        << ") and converse with the user (role: psychologist, gender unknown). You don't "
           "assist, but have a clear goal in mind for this meeting.\n"
        << "Goal: " << text("goal_of_visit") << "\n"
        << "Symptoms: " << text("description_of_current_problems") << "\n"
        << "Background: " << s.persona.occupation << ", " << s.persona.age << " years old. "
        << text("situation") << "\n"
        << "Communication type: " << style_label(s.style, s.locale) << ". " << s.style_fields.mood;
  }
  return out.str();
}

std::string render_full_case(const IllnessScript& s) {
  if (!s.manifest) throw Error("render_full_case: script has no manifest");
  std::string out = "<Author's note> ";
  out += s.persona.full_name();
  out += "(" + std::to_string(s.persona.age) + ", " + std::string(gender_code(s.persona.gender)) + "):";
  for (const auto& def : s.manifest->categories) {
    out += out.back() == ':' ? " [" : "\n[";
    out += def.label(s.locale);
    out += ": ";
    out += s.category_text(def.key).value_or("");
    out += "]";
  }
  return out;
}

}  // namespace vpsim
