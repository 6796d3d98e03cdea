#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vpsim/errors.hpp"
#include "vpsim/study.hpp"

namespace vpsim {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kTopEmotions = 15;

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(std::initializer_list<std::string> fields) {
  std::string line;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) line += ',';
    line += csv_field(f);
    first = false;
  }
  line += '\n';
  return line;
}

std::string opt_time(const std::optional<Timestamp>& t) { return t ? to_iso8601(*t) : ""; }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

ordered_json mean_std_json(const MeanStd& m) {
  return {{"mean", m.mean}, {"std", m.std}, {"n", m.n}};
}

std::vector<Session> sorted_sessions(const ExportInput& in) {
  auto sessions = in.sessions;
  std::sort(sessions.begin(), sessions.end(),
            [](const Session& a, const Session& b) { return a.session_id < b.session_id; });
  return sessions;
}

std::vector<std::string> item_order(const ExportInput& in) {
  std::vector<std::string> ids;
  if (in.questionnaire) {
    for (const auto& item : in.questionnaire->items) ids.push_back(item.id);
  } else {
    std::set<std::string> all;
    for (const auto& r : in.responses)
      for (const auto& [id, v] : r.answers) all.insert(id);
    ids.assign(all.begin(), all.end());
  }
  return ids;
}

std::string sessions_csv(const std::vector<Session>& sessions) {
  std::string out = csv_row({"session_id", "participant_token", "script_id", "style", "locale",
                             "status", "consent_at", "started_at", "ended_at", "duration_ms",
                             "participant_messages", "questionnaire_submitted", "excluded",
                             "exclusion_reason"});
  for (const auto& s : sessions) {
    std::string duration;
    if (s.started_at && s.ended_at)
      duration = std::to_string((*s.ended_at - *s.started_at).count());
    out += csv_row({s.session_id, s.participant_token, s.script_id, std::string(to_string(s.style)),
                    s.locale, std::string(to_string(s.status)), to_iso8601(s.consent_at),
                    opt_time(s.started_at), opt_time(s.ended_at), duration,
                    std::to_string(s.participant_message_count()),
                    s.questionnaire_submitted ? "1" : "0",
                    s.status == SessionStatus::excluded ? "1" : "0",
                    s.exclusion_reason.value_or("")});
  }
  return out;
}

std::string responses_csv(const ExportInput& in, const std::map<std::string, const Session*>& by_id) {
  std::string out =
      csv_row({"session_id", "submitted_at", "item_id", "index", "value", "skipped", "excluded"});
  auto responses = in.responses;
  std::sort(responses.begin(), responses.end(),
            [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
  const auto items = item_order(in);
  for (const auto& r : responses) {
    auto s = by_id.find(r.session_id);
    const std::string excluded =
        s != by_id.end() && s->second->status == SessionStatus::excluded ? "1" : "0";
    const std::string at = to_iso8601(r.submitted_at);
    for (const auto& id : items) {
      auto a = r.answers.find(id);
      if (a == r.answers.end()) continue;
      auto row = [&](std::size_t index, const std::string& value, bool skipped) {
        out += csv_row({r.session_id, at, id, std::to_string(index), value, skipped ? "1" : "0",
                        excluded});
      };
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Skipped>) {
              row(0, "", true);
            } else if constexpr (std::is_same_v<T, int>) {
              row(0, std::to_string(v), false);
            } else if constexpr (std::is_same_v<T, std::string>) {
              row(0, v, false);
            } else if constexpr (std::is_same_v<T, std::vector<int>>) {
              for (std::size_t i = 0; i < v.size(); ++i) row(i, std::to_string(v[i]), false);
            } else {
              for (std::size_t i = 0; i < v.size(); ++i) row(i, v[i], false);
            }
          },
          a->second);
    }
  }
  return out;
}

std::string transcript_jsonl(const Session& s) {
  std::string out;
  for (std::size_t i = 0; i < s.transcript.size(); ++i) {
    const auto& m = s.transcript[i];
    ordered_json line = {{"index", i},
                         {"role", to_string(m.role)},
                         {"origin", to_string(m.origin)},
                         {"content", m.content}};
    out += line.dump() + "\n";
  }
  return out;
}

}  // namespace

std::string compute_metrics_json(const ExportInput& input) {
  const auto sessions = sorted_sessions(input);
  std::map<std::string, const Session*> by_id;
  for (const auto& s : sessions) by_id[s.session_id] = &s;

  std::set<SatirStyle> styles;
  for (const auto& s : sessions) styles.insert(s.style);

  std::vector<Session> finished;
  for (const auto& s : sessions)
    if (s.status != SessionStatus::excluded && s.started_at && s.ended_at) finished.push_back(s);
  const auto engagement =
      finished.empty() ? std::map<SatirStyle, EngagementStats>{} : engagement_stats(finished);

  ordered_json doc;
  doc["sessions"] = sessions.size();
  doc["excluded"] = std::count_if(sessions.begin(), sessions.end(), [](const Session& s) {
    return s.status == SessionStatus::excluded;
  });
  doc["styles"] = ordered_json::object();

  for (auto style : styles) {
    ordered_json st;
    std::vector<QuestionnaireResponse> responses;
    for (const auto& r : input.responses) {
      auto s = by_id.find(r.session_id);
      if (s == by_id.end() || s->second->style != style ||
          s->second->status == SessionStatus::excluded)
        continue;
      responses.push_back(r);
    }
    std::sort(responses.begin(), responses.end(),
              [](const auto& a, const auto& b) { return a.session_id < b.session_id; });

    std::size_t n = 0, excluded = 0;
    for (const auto& s : sessions) {
      if (s.style != style) continue;
      ++n;
      if (s.status == SessionStatus::excluded) ++excluded;
    }
    st["sessions"] = n;
    st["excluded"] = excluded;
    st["responses"] = responses.size();

    if (auto e = engagement.find(style); e != engagement.end()) {
      st["engagement"] = {{"messages", mean_std_json(e->second.messages)},
                          {"minutes", mean_std_json(e->second.minutes)}};
    } else {
      st["engagement"] = nullptr;
    }

    ordered_json likert = ordered_json::object();
    for (const auto& id : item_order(input)) {
      if (input.questionnaire) {
        const Item* item = input.questionnaire->item(id);
        if (!item || item->kind != ItemKind::likert5) continue;
      }
      try {
        likert[id] = mean_std_json(likert_stats(id, responses));
      } catch (const Error&) {
      }
    }
    st["likert"] = std::move(likert);

    const auto ident = style_identification(responses, style);
    ordered_json counts = ordered_json::object();
    for (auto s : kAllStyles) counts[std::string(to_string(s))] = ident.counts.at(std::string(to_string(s)));
    counts[std::string(kNoneOfAbove)] = ident.counts.at(std::string(kNoneOfAbove));
    st["style_identification"] = {
        {"counts", counts}, {"total", ident.total}, {"correct_fraction", ident.correct_fraction}};

    if (input.adjective_map) {
      const auto ap = adjective_precision(responses, style, *input.adjective_map);
      ordered_json pct = ordered_json::object();
      for (const auto& [s, p] : ap.percentages) pct[std::string(to_string(s))] = p;
      st["adjective_precision"] = {{"total", ap.total}, {"precision", ap.precision}, {"percentages", pct}};
    }

    ordered_json ai = ordered_json::object();
    for (const auto& [id, m] : ai_familiarity_stats(responses)) ai[id] = mean_std_json(m);
    st["ai_familiarity"] = std::move(ai);

    std::vector<const SessionAffect*> affect;
    for (const auto& a : input.affect) {
      auto s = by_id.find(a.session_id);
      if (s != by_id.end() && s->second->style == style &&
          s->second->status != SessionStatus::excluded)
        affect.push_back(&a);
    }
    std::sort(affect.begin(), affect.end(),
              [](const auto* a, const auto* b) { return a->session_id < b->session_id; });
    if (!affect.empty()) {
      std::vector<EmotionVector> profiles;
      std::vector<double> sentiment;
      std::vector<ScoredMessage> messages;
      for (const auto* a : affect) {
        profiles.push_back(a->profile);
        sentiment.push_back(a->sentiment);
        messages.insert(messages.end(), a->messages.begin(), a->messages.end());
      }
      const auto cohort = aggregate_profile(profiles);
      ordered_json top = ordered_json::array();
      for (const auto& [name, score] : top_emotions(cohort, kTopEmotions))
        top.push_back({{"emotion", name}, {"score", score}});
      ordered_json triggers = ordered_json::object();
      for (std::size_t i = 0; i < 3 && i < top.size(); ++i) {
        const std::string name = top[i]["emotion"];
        ordered_json words = ordered_json::array();
        for (const auto& [w, score] : trigger_words(messages, name, 5))
          words.push_back({{"word", w}, {"score", score}});
        triggers[name] = std::move(words);
      }
      st["affect"] = {{"sessions", affect.size()},
                      {"sentiment", mean_std_json(mean_std(sentiment))},
                      {"top_emotions", top},
                      {"trigger_words", triggers}};
    } else {
      st["affect"] = nullptr;
    }
    doc["styles"][std::string(to_string(style))] = std::move(st);
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> export_dataset(const ExportInput& input, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "transcripts", ec);
  if (ec) throw Error("cannot create " + (dir / "transcripts").string() + ": " + ec.message());

  const auto sessions = sorted_sessions(input);
  std::map<std::string, const Session*> by_id;
  for (const auto& s : sessions) by_id[s.session_id] = &s;

  std::vector<std::string> written;
  auto emit = [&](const std::string& rel, const std::string& content) {
    write_file(dir / rel, content);
    written.push_back(rel);
  };
  emit("sessions.csv", sessions_csv(sessions));
  emit("responses.csv", responses_csv(input, by_id));
  emit("metrics.json", compute_metrics_json(input));
  for (const auto& s : sessions) emit("transcripts/" + s.session_id + ".jsonl", transcript_jsonl(s));
  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace vpsim
