#include "vpsim/study.hpp"

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

constexpr std::string_view kQuestionnaireFormat = "vpsim-questionnaire/1";
constexpr std::string_view kAdjectiveMapFormat = "vpsim-adjective-map/1";

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

std::string string_field(const json& obj, const char* key, const std::string& path,
                         bool required = true) {
  if (!obj.contains(key) || obj.at(key).is_null()) {
    if (required) throw ParseError(path + "." + key + ": missing");
    return {};
  }
  if (!obj.at(key).is_string()) throw ParseError(path + "." + key + ": expected a string");
  return obj.at(key).get<std::string>();
}

std::string item_prefix(std::string_view id) { return "item '" + std::string(id) + "': "; }

}  // namespace

std::string_view to_string(ItemKind k) noexcept {
  switch (k) {
    case ItemKind::likert5: return "likert5";
    case ItemKind::single_choice: return "single_choice";
    case ItemKind::multi_select: return "multi_select";
    case ItemKind::free_text: return "free_text";
  }
  return "likert5";
}

std::optional<ItemKind> parse_item_kind(std::string_view text) noexcept {
  for (auto k : {ItemKind::likert5, ItemKind::single_choice, ItemKind::multi_select,
                 ItemKind::free_text})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

const ItemOption* Item::option(std::string_view option_id) const {
  for (const auto& o : options)
    if (o.id == option_id) return &o;
  return nullptr;
}

std::optional<int> Item::likert_code(std::string_view option_id) const {
  if (kind != ItemKind::likert5) return std::nullopt;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (options[i].id != option_id) continue;
    const int pos = static_cast<int>(i);
    return positive_first ? 5 - pos : pos + 1;
  }
  return std::nullopt;
}

const Item* Questionnaire::item(std::string_view id) const {
  for (const auto& it : items)
    if (it.id == id) return &it;
  return nullptr;
}

Questionnaire load_questionnaire(std::string_view document) {
  const json doc = parse_json(document, "questionnaire");
  if (!doc.is_object()) throw ParseError("questionnaire: expected an object");
  if (doc.contains("format") && doc.at("format") != kQuestionnaireFormat)
    throw ParseError("questionnaire: unsupported format");

  Questionnaire q;
  q.version = string_field(doc, "version", "questionnaire");
  q.locale = string_field(doc, "locale", "questionnaire", false);
  if (!doc.contains("items") || !doc.at("items").is_array())
    throw ParseError("questionnaire.items: expected an array");

  std::vector<std::string> violations;
  std::size_t index = 0;
  for (const auto& node : doc.at("items")) {
    const std::string path = "items[" + std::to_string(index++) + "]";
    if (!node.is_object()) throw ParseError(path + ": expected an object");
    Item item;
    item.id = string_field(node, "id", path);
    const std::string kind = string_field(node, "kind", path);
    auto parsed = parse_item_kind(kind);
    if (!parsed) throw ParseError(path + ".kind: unknown kind '" + kind + "'");
    item.kind = *parsed;
    item.prompt = string_field(node, "prompt", path, false);
    if (node.contains("positive_first")) {
      if (!node.at("positive_first").is_boolean())
        throw ParseError(path + ".positive_first: expected a boolean");
      item.positive_first = node.at("positive_first").get<bool>();
    }
    if (node.contains("repeat")) {
      if (!node.at("repeat").is_number_integer())
        throw ParseError(path + ".repeat: expected an integer");
      item.repeat = node.at("repeat").get<int>();
    }
    if (node.contains("options")) {
      if (!node.at("options").is_array()) throw ParseError(path + ".options: expected an array");
      for (const auto& opt : node.at("options")) {
        if (!opt.is_object()) throw ParseError(path + ".options: expected objects");
        item.options.push_back(
            {string_field(opt, "id", path + ".options"), string_field(opt, "label", path + ".options", false)});
      }
    }
    if (node.contains("conditional_on") && !node.at("conditional_on").is_null()) {
      const auto& c = node.at("conditional_on");
      if (!c.is_object()) throw ParseError(path + ".conditional_on: expected an object");
      ItemCondition cond;
      cond.item = string_field(c, "item", path + ".conditional_on");
      if (!c.contains("options") || !c.at("options").is_array())
        throw ParseError(path + ".conditional_on.options: expected an array");
      for (const auto& o : c.at("options")) {
        if (!o.is_string()) throw ParseError(path + ".conditional_on.options: expected strings");
        cond.options.push_back(o.get<std::string>());
      }
      item.conditional_on = std::move(cond);
    }
    q.items.push_back(std::move(item));
  }

  std::set<std::string> seen;
  for (const auto& item : q.items) {
    const std::string p = item_prefix(item.id);
    if (item.id.empty()) violations.push_back("item with empty id");
    if (!seen.insert(item.id).second) violations.push_back(p + "duplicate item id");
    if (item.repeat < 1) violations.push_back(p + "repeat must be at least 1");
    if (item.repeat > 1 && item.kind != ItemKind::likert5)
      violations.push_back(p + "only likert5 items may repeat");
    switch (item.kind) {
      case ItemKind::likert5:
        if (item.options.size() != 5) violations.push_back(p + "likert5 needs exactly 5 options");
        break;
      case ItemKind::free_text:
        if (!item.options.empty()) violations.push_back(p + "free_text takes no options");
        break;
      default:
        if (item.options.empty()) violations.push_back(p + "choice item without options");
    }
    std::set<std::string> option_ids;
    for (const auto& o : item.options) {
      if (o.id.empty()) violations.push_back(p + "option with empty id");
      if (!option_ids.insert(o.id).second) violations.push_back(p + "duplicate option '" + o.id + "'");
    }
    if (item.conditional_on) {
      const auto& c = *item.conditional_on;
      const Item* target = q.item(c.item);
      if (!target) {
        violations.push_back(p + "conditional on missing item '" + c.item + "'");
      } else if (target == &item) {
        violations.push_back(p + "conditional on itself");
      } else {
        if (target->kind == ItemKind::free_text)
          violations.push_back(p + "conditional on free_text item '" + c.item + "'");
        if (c.options.empty()) violations.push_back(p + "condition lists no options");
        for (const auto& o : c.options)
          if (!target->option(o))
            violations.push_back(p + "condition option '" + o + "' not in item '" + c.item + "'");
      }
    }
  }
  if (!violations.empty()) throw ValidationError("invalid questionnaire", violations);
  return q;
}

Questionnaire load_questionnaire_file(const std::string& path) {
  return load_questionnaire(read_file(path));
}

std::string serialize_questionnaire(const Questionnaire& q) {
  ordered_json doc;
  doc["format"] = kQuestionnaireFormat;
  doc["version"] = q.version;
  doc["locale"] = q.locale;
  doc["items"] = ordered_json::array();
  for (const auto& item : q.items) {
    ordered_json n;
    n["id"] = item.id;
    n["kind"] = to_string(item.kind);
    if (item.repeat != 1) n["repeat"] = item.repeat;
    if (item.positive_first) n["positive_first"] = true;
    n["prompt"] = item.prompt;
    if (item.conditional_on)
      n["conditional_on"] = {{"item", item.conditional_on->item},
                             {"options", item.conditional_on->options}};
    n["options"] = ordered_json::array();
    for (const auto& o : item.options) n["options"].push_back({{"id", o.id}, {"label", o.label}});
    doc["items"].push_back(std::move(n));
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

namespace {

// Option ids (or likert codes) chosen in an answer, for condition checks.
bool answer_selects(const Item& item, const AnswerValue& value, std::string_view option_id) {
  if (item.kind == ItemKind::likert5) {
    const auto code = item.likert_code(option_id);
    if (!code) return false;
    if (auto* v = std::get_if<int>(&value)) return *v == *code;
    if (auto* v = std::get_if<std::vector<int>>(&value))
      return std::find(v->begin(), v->end(), *code) != v->end();
    return false;
  }
  if (auto* v = std::get_if<std::string>(&value)) return *v == option_id;
  if (auto* v = std::get_if<std::vector<std::string>>(&value))
    return std::find(v->begin(), v->end(), option_id) != v->end();
  return false;
}

bool is_shown(const Questionnaire& q, const Item& item, const QuestionnaireResponse& r) {
  if (!item.conditional_on) return true;
  const Item* target = q.item(item.conditional_on->item);
  if (!target) return false;
  auto it = r.answers.find(target->id);
  if (it == r.answers.end()) return false;
  if (!is_shown(q, *target, r)) return false;
  return std::any_of(item.conditional_on->options.begin(), item.conditional_on->options.end(),
                     [&](const std::string& o) { return answer_selects(*target, it->second, o); });
}

void check_value(const Item& item, const AnswerValue& value, std::vector<std::string>& out) {
  const std::string p = item_prefix(item.id);
  if (std::holds_alternative<Skipped>(value)) return;
  auto check_code = [&](int code) {
    if (code < 1 || code > 5)
      out.push_back(p + "likert value " + std::to_string(code) + " outside 1..5");
  };
  switch (item.kind) {
    case ItemKind::likert5:
      if (item.repeat == 1) {
        if (auto* v = std::get_if<int>(&value)) check_code(*v);
        else out.push_back(p + "expected one likert value");
      } else {
        auto* v = std::get_if<std::vector<int>>(&value);
        if (!v) {
          out.push_back(p + "expected " + std::to_string(item.repeat) + " likert values");
        } else {
          if (v->size() != static_cast<std::size_t>(item.repeat))
            out.push_back(p + "expected " + std::to_string(item.repeat) + " likert values, got " +
                          std::to_string(v->size()));
          for (int c : *v) check_code(c);
        }
      }
      break;
    case ItemKind::single_choice:
      if (auto* v = std::get_if<std::string>(&value)) {
        if (!item.option(*v)) out.push_back(p + "unknown option '" + *v + "'");
      } else {
        out.push_back(p + "expected one option id");
      }
      break;
    case ItemKind::multi_select:
      if (auto* v = std::get_if<std::vector<std::string>>(&value)) {
        std::set<std::string> seen;
        for (const auto& o : *v) {
          if (!item.option(o)) out.push_back(p + "unknown option '" + o + "'");
          if (!seen.insert(o).second) out.push_back(p + "option '" + o + "' selected twice");
        }
      } else {
        out.push_back(p + "expected a list of option ids");
      }
      break;
    case ItemKind::free_text:
      if (!std::holds_alternative<std::string>(value)) out.push_back(p + "expected text");
      break;
  }
}

}  // namespace

std::vector<std::string> validate_response(const Questionnaire& q, const QuestionnaireResponse& r) {
  std::vector<std::string> out;
  for (const auto& [id, value] : r.answers)
    if (!q.item(id)) out.push_back(item_prefix(id) + "not in questionnaire");
  for (const auto& item : q.items) {
    auto it = r.answers.find(item.id);
    const bool shown = is_shown(q, item, r);
    if (it == r.answers.end()) {
      if (!item.conditional_on) out.push_back(item_prefix(item.id) + "neither answered nor skipped");
      continue;
    }
    if (!shown) {
      if (!std::holds_alternative<Skipped>(it->second))
        out.push_back(item_prefix(item.id) + "answered although its condition is not met");
      continue;
    }
    check_value(item, it->second, out);
  }
  return out;
}

QuestionnaireResponse response_from_json(const Questionnaire& q, std::string_view session_id,
                                         std::string_view answers_json, Timestamp submitted_at) {
  const json doc = parse_json(answers_json, "answers");
  if (!doc.is_object()) throw ParseError("answers: expected an object");
  QuestionnaireResponse r;
  r.session_id = std::string(session_id);
  r.submitted_at = submitted_at;
  std::vector<std::string> violations;
  for (const auto& [id, v] : doc.items()) {
    const Item* item = q.item(id);
    const std::string p = item_prefix(id);
    if (!item) {
      violations.push_back(p + "not in questionnaire");
      continue;
    }
    if (v.is_null()) {
      r.answers[id] = Skipped{};
      continue;
    }
    auto likert = [&](const json& x) -> std::optional<int> {
      if (x.is_number_integer()) return x.get<int>();
      if (x.is_string()) {
        if (auto c = item->likert_code(x.get<std::string>())) return c;
        violations.push_back(p + "unknown option '" + x.get<std::string>() + "'");
        return std::nullopt;
      }
      violations.push_back(p + "expected a likert code or option id");
      return std::nullopt;
    };
    switch (item->kind) {
      case ItemKind::likert5:
        if (v.is_array()) {
          std::vector<int> codes;
          for (const auto& x : v)
            if (auto c = likert(x)) codes.push_back(*c);
          r.answers[id] = std::move(codes);
        } else if (auto c = likert(v)) {
          r.answers[id] = *c;
        }
        break;
      case ItemKind::single_choice:
      case ItemKind::free_text:
        if (v.is_string()) r.answers[id] = v.get<std::string>();
        else violations.push_back(p + "expected a string");
        break;
      case ItemKind::multi_select:
        if (v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); }))
          r.answers[id] = v.get<std::vector<std::string>>();
        else violations.push_back(p + "expected a list of option ids");
        break;
    }
  }
  if (!violations.empty()) throw ValidationError("invalid answers", violations);
  return r;
}

std::string answers_to_json(const QuestionnaireResponse& r) {
  ordered_json doc = ordered_json::object();
  for (const auto& [id, value] : r.answers) {
    std::visit(
        [&, &key = id](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Skipped>) doc[key] = nullptr;
          else doc[key] = v;
        },
        value);
  }
  return doc.dump();
}

// ---------------------------------------------------------------------------

AdjectiveMap load_adjective_map(std::string_view document) {
  const json doc = parse_json(document, "adjective map");
  if (!doc.is_object()) throw ParseError("adjective map: expected an object");
  if (doc.contains("format") && doc.at("format") != kAdjectiveMapFormat)
    throw ParseError("adjective map: unsupported format");
  if (!doc.contains("entries") || !doc.at("entries").is_object())
    throw ParseError("adjective map.entries: expected an object");
  AdjectiveMap map;
  std::vector<std::string> violations;
  for (const auto& [adjective, style] : doc.at("entries").items()) {
    if (!style.is_string()) throw ParseError("adjective map." + adjective + ": expected a string");
    auto s = parse_style(style.get<std::string>());
    if (!s) violations.push_back("adjective '" + adjective + "': unknown style");
    else if (*s == SatirStyle::congruent)
      violations.push_back("adjective '" + adjective + "': congruent is not a mapped style");
    else map.entries[adjective] = *s;
  }
  if (!violations.empty()) throw ValidationError("invalid adjective map", violations);
  return map;
}

void AdjectiveMap::check(const Questionnaire& q) const {
  std::vector<std::string> violations;
  const Item* item = q.item(kAdjectiveItem);
  if (!item) throw ValidationError({"questionnaire has no adjective item"});
  for (const auto& o : item->options)
    if (!entries.count(o.id)) violations.push_back("adjective '" + o.id + "' is not mapped");
  for (const auto& [adjective, style] : entries) {
    if (!item->option(adjective))
      violations.push_back("adjective '" + adjective + "' is not offered by the questionnaire");
    if (style == SatirStyle::congruent)
      violations.push_back("adjective '" + adjective + "': congruent is not a mapped style");
  }
  if (!violations.empty()) throw ValidationError("adjective map does not match questionnaire", violations);
}

MeanStd likert_stats(std::string_view item_id, std::span<const QuestionnaireResponse> responses) {
  std::vector<double> values;
  for (const auto& r : responses) {
    auto it = r.answers.find(std::string(item_id));
    if (it == r.answers.end()) continue;
    if (auto* v = std::get_if<int>(&it->second)) values.push_back(*v);
    if (auto* v = std::get_if<std::vector<int>>(&it->second))
      for (int c : *v) values.push_back(c);
  }
  if (values.empty()) throw Error("no numeric answers for item '" + std::string(item_id) + "'");
  return mean_std(values);
}

StyleIdentification style_identification(std::span<const QuestionnaireResponse> responses,
                                         SatirStyle true_style) {
  StyleIdentification out;
  for (auto s : kAllStyles) out.counts[std::string(to_string(s))] = 0;
  out.counts[std::string(kNoneOfAbove)] = 0;
  for (const auto& r : responses) {
    auto it = r.answers.find(std::string(kStyleItem));
    if (it == r.answers.end()) continue;
    if (auto* v = std::get_if<std::string>(&it->second)) {
      ++out.counts[*v];
      ++out.total;
    }
  }
  if (out.total > 0)
    out.correct_fraction =
        static_cast<double>(out.counts[std::string(to_string(true_style))]) / out.total;
  return out;
}

AdjectivePrecision adjective_precision(std::span<const QuestionnaireResponse> responses,
                                       SatirStyle target_style, const AdjectiveMap& map) {
  AdjectivePrecision out;
  for (auto s : kAllStyles)
    if (s != SatirStyle::congruent) out.counts[s] = 0;
  for (const auto& r : responses) {
    auto it = r.answers.find(std::string(kAdjectiveItem));
    if (it == r.answers.end()) continue;
    auto* v = std::get_if<std::vector<std::string>>(&it->second);
    if (!v) continue;
    for (const auto& adjective : *v) {
      auto m = map.entries.find(adjective);
      if (m == map.entries.end())
        throw ValidationError({"adjective '" + adjective + "' is not mapped"});
      ++out.counts[m->second];
      ++out.total;
    }
  }
  for (const auto& [style, count] : out.counts)
    out.percentages[style] = out.total > 0 ? 100.0 * count / out.total : 0.0;
  auto t = out.percentages.find(target_style);
  out.precision = t == out.percentages.end() ? 0.0 : t->second;
  return out;
}

std::map<std::string, MeanStd> ai_familiarity_stats(std::span<const QuestionnaireResponse> responses) {
  std::map<std::string, MeanStd> out;
  for (auto id : kAiFamiliarityItems) {
    try {
      out[std::string(id)] = likert_stats(id, responses);
    } catch (const Error&) {
    }
  }
  return out;
}

}  // namespace vpsim
