#include <doctest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/study.hpp"

using namespace vpsim;
using namespace vpsim::test;
using json = nlohmann::json;

namespace {

const Questionnaire& questionnaire(const std::string& locale = "en") {
  static std::map<std::string, Questionnaire> cache;
  auto it = cache.find(locale);
  if (it == cache.end())
    it = cache.emplace(locale, load_questionnaire_file(
                                   data_path("questionnaires/questionnaire." + locale + ".json").string()))
             .first;
  return it->second;
}

const AdjectiveMap& adjective_map() {
  static AdjectiveMap m = load_adjective_map(read_text(data_path("adjective_map.json")));
  return m;
}

json fixture_answers() {
  return json::parse(read_text(data_path("fixtures/accuser_replay_user.en.json")))["answers"];
}

QuestionnaireResponse response(const json& answers, const std::string& sid = "s-1",
                               const Questionnaire& q = questionnaire()) {
  return response_from_json(q, sid, answers.dump(), from_epoch_ms(1714564800000));
}

QuestionnaireResponse with(const std::string& item, json value, const std::string& sid = "s-1") {
  auto a = fixture_answers();
  a[item] = std::move(value);
  return response(a, sid);
}

// Responses whose adjective picks hit the given style counts.
std::vector<QuestionnaireResponse> adjective_responses(const std::map<SatirStyle, int>& counts) {
  std::map<SatirStyle, std::vector<std::string>> pool;
  for (const auto& [adj, style] : adjective_map().entries) pool[style].push_back(adj);
  std::vector<std::string> picks;
  for (const auto& [style, n] : counts)
    for (int i = 0; i < n; ++i) picks.push_back(pool[style][static_cast<std::size_t>(i) % pool[style].size()]);
  // Spread over participants, no adjective twice per participant.
  std::vector<QuestionnaireResponse> out;
  std::vector<std::vector<std::string>> buckets;
  for (const auto& p : picks) {
    auto it = std::find_if(buckets.begin(), buckets.end(), [&](const auto& b) {
      return std::find(b.begin(), b.end(), p) == b.end();
    });
    if (it == buckets.end()) buckets.push_back({p});
    else it->push_back(p);
  }
  for (std::size_t i = 0; i < buckets.size(); ++i)
    out.push_back(with("adjectives", buckets[i], "s-" + std::to_string(i)));
  return out;
}

}  // namespace

TEST_CASE("shipped questionnaires load with 17 items") {
  for (const char* loc : {"en", "de"}) {
    const auto& q = questionnaire(loc);
    CHECK(q.locale == loc);
    CHECK(q.items.size() == 17);
    int ratings = 0;
    for (const auto& item : q.items) ratings += item.repeat;
    CHECK(ratings == 21);
    for (auto id : kAiFamiliarityItems) CHECK(q.item(id) != nullptr);
    REQUIRE(q.item(kStyleItem) != nullptr);
    CHECK(q.item(kStyleItem)->option(kNoneOfAbove) != nullptr);
    CHECK_NOTHROW(adjective_map().check(q));
  }
}

TEST_CASE("translations share item and option ids") {
  const auto& en = questionnaire("en");
  const auto& de = questionnaire("de");
  REQUIRE(en.items.size() == de.items.size());
  for (std::size_t i = 0; i < en.items.size(); ++i) {
    CHECK(en.items[i].id == de.items[i].id);
    CHECK(en.items[i].kind == de.items[i].kind);
    CHECK(en.items[i].conditional_on == de.items[i].conditional_on);
    REQUIRE(en.items[i].options.size() == de.items[i].options.size());
    for (std::size_t o = 0; o < en.items[i].options.size(); ++o)
      CHECK(en.items[i].options[o].id == de.items[i].options[o].id);
  }
}

TEST_CASE("questionnaire round trip is lossless") {
  for (const char* loc : {"en", "de"}) {
    const auto& q = questionnaire(loc);
    const auto text = serialize_questionnaire(q);
    CHECK(load_questionnaire(text) == q);
    CHECK(serialize_questionnaire(load_questionnaire(text)) == text);
  }
}

TEST_CASE("questionnaire schema violations") {
  auto doc = json::parse(serialize_questionnaire(questionnaire()));
  auto expect_violation = [](const json& d, const std::string& needle) {
    try {
      load_questionnaire(d.dump());
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      bool found = false;
      for (const auto& v : e.violations()) found |= v.find(needle) != std::string::npos;
      CHECK_MESSAGE(found, needle);
    }
  };
  SUBCASE("duplicate id") {
    doc["items"].push_back(doc["items"][0]);
    expect_violation(doc, "item 'realism'");
  }
  SUBCASE("missing conditional reference") {
    for (auto& item : doc["items"])
      if (item["id"] == "authenticity_reason") item["conditional_on"]["item"] = "nope";
    expect_violation(doc, "item 'authenticity_reason'");
  }
  SUBCASE("condition option absent from target") {
    for (auto& item : doc["items"])
      if (item["id"] == "authenticity_reason") item["conditional_on"]["options"] = {"maybe"};
    expect_violation(doc, "maybe");
  }
  SUBCASE("likert with four options") {
    doc["items"][0]["options"].erase(0);
    expect_violation(doc, "item 'realism'");
  }
  SUBCASE("malformed") { CHECK_THROWS_AS(load_questionnaire("{"), ParseError); }
}

TEST_CASE("likert coding honors the positive pole") {
  const auto& q = questionnaire();
  CHECK(q.item("authenticity")->likert_code("strongly_agree") == 5);
  CHECK(q.item("authenticity")->likert_code("strongly_disagree") == 1);
  CHECK(q.item("recommend")->likert_code("very_likely") == 5);
  CHECK(q.item("recommend")->likert_code("very_unlikely") == 1);
  CHECK_FALSE(q.item("recommend")->likert_code("nope").has_value());
}

TEST_CASE("fixture response is valid and survives a JSON round trip") {
  const auto r = response(fixture_answers());
  CHECK(validate_response(questionnaire(), r).empty());
  CHECK(std::get<std::vector<int>>(r.answers.at("realism")) == std::vector<int>{4, 4, 3, 5, 4});
  CHECK(std::get<int>(r.answers.at("authenticity")) == 4);
  CHECK(std::holds_alternative<Skipped>(r.answers.at("authenticity_reason")));
  const auto again = response(json::parse(answers_to_json(r)));
  CHECK(again == r);
}

TEST_CASE("inadmissible answers are rejected") {
  const auto& q = questionnaire();
  CHECK_FALSE(validate_response(q, with("recommend", 6)).empty());
  CHECK_FALSE(validate_response(q, with("realism", {4, 4, 4})).empty());
  CHECK_FALSE(validate_response(q, with("satir_style", "happy")).empty());
  CHECK_THROWS_AS(with("adjectives", {1, 2}), ValidationError);
  CHECK_THROWS_AS(with("authenticity", "sort_of"), ValidationError);
  auto unknown = with("adjectives", {"aggressive", "grumpy"});
  const auto v = validate_response(q, unknown);
  REQUIRE_FALSE(v.empty());
  CHECK(v[0].find("grumpy") != std::string::npos);

  auto missing = fixture_answers();
  missing.erase("recommend");
  CHECK_FALSE(validate_response(q, response(missing)).empty());

  // Condition not met: answering the follow-up is an error, omitting it is fine.
  CHECK_FALSE(validate_response(q, with("authenticity_reason", {"other"})).empty());
  auto omitted = fixture_answers();
  omitted.erase("authenticity_reason");
  CHECK(validate_response(q, response(omitted)).empty());

  // Condition met.
  auto a = fixture_answers();
  a["authenticity"] = "disagree";
  a["authenticity_reason"] = {"other"};
  a["authenticity_reason_other"] = "too polite";
  CHECK(validate_response(q, response(a)).empty());

  auto skipped = fixture_answers();
  for (auto& [k, val] : skipped.items()) val = nullptr;
  CHECK(validate_response(q, response(skipped)).empty());
}

TEST_CASE("likert statistics") {
  std::vector<QuestionnaireResponse> rs{with("recommend", 3, "a"), with("recommend", 4, "b"),
                                        with("recommend", 5, "c"), with("recommend", nullptr, "d")};
  const auto st = likert_stats("recommend", rs);
  CHECK(st.mean == doctest::Approx(4.0));
  CHECK(st.std == doctest::Approx(1.0));
  CHECK(st.n == 3);

  const auto realism = likert_stats("realism", std::vector{response(fixture_answers())});
  CHECK(realism.n == 5);
  CHECK(realism.mean == doctest::Approx(4.0));

  std::vector<QuestionnaireResponse> none{with("recommend", nullptr)};
  CHECK_THROWS_AS(likert_stats("recommend", none), Error);
}

TEST_CASE("likert statistics are order independent") {
  std::mt19937 rng(4);
  std::vector<QuestionnaireResponse> rs;
  for (int i = 0; i < 20; ++i) rs.push_back(with("education_usefulness", 1 + static_cast<int>(rng() % 5), std::to_string(i)));
  const auto base = likert_stats("education_usefulness", rs);
  for (int round = 0; round < 10; ++round) {
    std::shuffle(rs.begin(), rs.end(), rng);
    const auto st = likert_stats("education_usefulness", rs);
    CHECK(st.mean == doctest::Approx(base.mean));
    CHECK(st.std == doctest::Approx(base.std));
  }
}

TEST_CASE("style identification") {
  std::vector<QuestionnaireResponse> rs;
  const std::vector<std::pair<std::string, int>> picks{
      {"accuser", 6}, {"congruent", 3}, {"rationalizer", 3}, {"none_of_above", 2}};
  for (const auto& [opt, n] : picks)
    for (int i = 0; i < n; ++i) rs.push_back(with("satir_style", opt, opt + std::to_string(i)));
  rs.push_back(with("satir_style", nullptr, "skip"));
  const auto id = style_identification(rs, SatirStyle::accuser);
  CHECK(id.total == 14);
  CHECK(id.counts.at("accuser") == 6);
  CHECK(id.counts.at("appeaser") == 0);
  CHECK(id.counts.size() == 6);
  CHECK(id.correct_fraction == doctest::Approx(6.0 / 14));
}

TEST_CASE("adjective precision for the accuser reconstruction") {
  const auto rs = adjective_responses({{SatirStyle::accuser, 22},
                                       {SatirStyle::appeaser, 4},
                                       {SatirStyle::distractor, 5},
                                       {SatirStyle::rationalizer, 8}});
  const auto ap = adjective_precision(rs, SatirStyle::accuser, adjective_map());
  CHECK(ap.total == 39);
  CHECK(std::abs(ap.precision - 56.4) <= 0.05);
  CHECK(std::abs(ap.percentages.at(SatirStyle::accuser) - 56.4) <= 0.05);
  CHECK(std::abs(ap.percentages.at(SatirStyle::appeaser) - 10.3) <= 0.05);
  CHECK(std::abs(ap.percentages.at(SatirStyle::distractor) - 12.8) <= 0.05);
  CHECK(std::abs(ap.percentages.at(SatirStyle::rationalizer) - 20.5) <= 0.05);
  double sum = 0;
  for (const auto& [s, p] : ap.percentages) sum += p;
  CHECK(std::abs(sum - 100.0) <= 0.2);
}

TEST_CASE("adjective precision for the rationalizer reconstruction") {
  const auto rs = adjective_responses({{SatirStyle::rationalizer, 22},
                                       {SatirStyle::accuser, 22},
                                       {SatirStyle::appeaser, 5},
                                       {SatirStyle::distractor, 4}});
  const auto ap = adjective_precision(rs, SatirStyle::rationalizer, adjective_map());
  CHECK(ap.total == 53);
  CHECK(std::abs(ap.precision - 41.5) <= 0.05);
  CHECK(std::abs(ap.percentages.at(SatirStyle::accuser) - 41.5) <= 0.05);
  CHECK(std::abs(ap.percentages.at(SatirStyle::appeaser) - 9.4) <= 0.05);
  // 4 of 53 is 7.55; the published one-decimal figure is matched within 0.1.
  CHECK(std::abs(ap.percentages.at(SatirStyle::distractor) - 7.6) <= 0.1);
}

TEST_CASE("published percentages pin down the counts") {
  // Brute force over every total up to 60 and every 4-way split.
  auto search = [](std::array<double, 4> pct, std::array<double, 4> tol) {
    std::vector<std::array<int, 5>> hits;
    for (int t = 1; t <= 60; ++t)
      for (int a = 0; a <= t; ++a)
        for (int b = 0; a + b <= t; ++b)
          for (int c = 0; a + b + c <= t; ++c) {
            const int d = t - a - b - c;
            const std::array<int, 4> x{a, b, c, d};
            bool ok = true;
            for (int i = 0; i < 4; ++i) ok &= std::abs(100.0 * x[i] / t - pct[i]) <= tol[i] + 1e-9;
            if (ok) hits.push_back({t, a, b, c, d});
          }
    return hits;
  };
  const auto acc = search({56.4, 10.3, 12.8, 20.5}, {0.05, 0.05, 0.05, 0.05});
  REQUIRE(acc.size() == 1);
  CHECK(acc[0] == std::array<int, 5>{39, 22, 4, 5, 8});
  const auto rat = search({41.5, 41.5, 9.4, 7.6}, {0.05, 0.05, 0.05, 0.1});
  REQUIRE(rat.size() == 1);
  CHECK(rat[0] == std::array<int, 5>{53, 22, 22, 5, 4});
}

TEST_CASE("adjective precision rejects unmapped adjectives and empty input") {
  AdjectiveMap partial = adjective_map();
  partial.entries.erase("aggressive");
  CHECK_THROWS_AS(partial.check(questionnaire()), ValidationError);
  const std::vector rs{with("adjectives", {"aggressive"})};
  CHECK_THROWS_AS(adjective_precision(rs, SatirStyle::accuser, partial), ValidationError);
  CHECK_THROWS_AS(load_adjective_map(R"({"entries":{"calm":"congruent"}})"), ValidationError);
}

TEST_CASE("AI familiarity") {
  std::vector<QuestionnaireResponse> rs;
  for (int v : {2, 3, 4}) {
    auto a = fixture_answers();
    a["ai_trust"] = v;
    a["ai_excitement"] = nullptr;
    rs.push_back(response(a, "s" + std::to_string(v)));
  }
  const auto st = ai_familiarity_stats(rs);
  CHECK(st.at("ai_trust").mean == doctest::Approx(3.0));
  CHECK(st.at("ai_trust").std == doctest::Approx(1.0));
  CHECK(st.at("ai_usage").mean == doctest::Approx(4.0));
  CHECK_FALSE(st.count("ai_excitement"));
}

TEST_CASE("metrics agree across locales") {
  std::vector<QuestionnaireResponse> en, de;
  for (int i = 0; i < 5; ++i) {
    auto a = fixture_answers();
    a["recommend"] = 1 + i;
    en.push_back(response(a, std::to_string(i), questionnaire("en")));
    de.push_back(response(a, std::to_string(i), questionnaire("de")));
  }
  CHECK(likert_stats("recommend", en).mean == likert_stats("recommend", de).mean);
  CHECK(style_identification(en, SatirStyle::accuser).counts ==
        style_identification(de, SatirStyle::accuser).counts);
}

namespace {

ExportInput sample_input() {
  ExportInput in;
  in.questionnaire = &questionnaire();
  in.adjective_map = &adjective_map();
  for (int i = 0; i < 3; ++i) {
    Session s;
    s.session_id = "s-" + std::to_string(i);
    s.participant_token = "p-" + std::to_string(i);
    s.script_id = "accuser.en";
    s.locale = "en";
    s.consent_at = from_epoch_ms(1714564800000);
    s.started_at = from_epoch_ms(1714564810000);
    s.ended_at = from_epoch_ms(1714564810000 + 240000 * (i + 1));
    s.status = i == 2 ? SessionStatus::excluded : SessionStatus::complete;
    if (i == 2) s.exclusion_reason = "said \"hi\", left";
    s.questionnaire_submitted = true;
    s.transcript = {{Role::assistant, "<calm> Hello, doctor.", Origin::scripted},
                    {Role::user, "Hi, what brings you here?", Origin::participant},
                    {Role::assistant, "<annoyed> My hip, again.", Origin::model}};
    in.sessions.push_back(s);
    in.responses.push_back(response(fixture_answers(), s.session_id));
  }
  return in;
}

}  // namespace

TEST_CASE("export of an empty study still writes headers") {
  TempDir dir;
  ExportInput in;
  const auto files = export_dataset(in, dir.path());
  CHECK(std::find(files.begin(), files.end(), "sessions.csv") != files.end());
  CHECK(read_text(dir.path() / "sessions.csv").rfind("session_id,participant_token,script_id,style", 0) == 0);
  CHECK(read_text(dir.path() / "responses.csv") ==
        "session_id,submitted_at,item_id,index,value,skipped,excluded\n");
  CHECK(json::parse(read_text(dir.path() / "metrics.json"))["sessions"] == 0);
}

TEST_CASE("export is deterministic and order independent") {
  TempDir a, b;
  auto in = sample_input();
  const auto files = export_dataset(in, a.path());
  CHECK(std::is_sorted(files.begin(), files.end()));
  CHECK(std::find(files.begin(), files.end(), "transcripts/s-0.jsonl") != files.end());

  std::reverse(in.sessions.begin(), in.sessions.end());
  std::reverse(in.responses.begin(), in.responses.end());
  CHECK(export_dataset(in, b.path()) == files);
  for (const auto& f : files) CHECK_MESSAGE(read_text(a.path() / f) == read_text(b.path() / f), f);

  const auto sessions = read_text(a.path() / "sessions.csv");
  CHECK(sessions.find("\"said \"\"hi\"\", left\"") != std::string::npos);
  const auto metrics = json::parse(read_text(a.path() / "metrics.json"));
  const auto& acc = metrics["styles"]["accuser"];
  CHECK(acc["sessions"] == 3);
  CHECK(acc["excluded"] == 1);
  CHECK(acc["style_identification"]["correct_fraction"] == 1.0);

  const auto transcript = read_text(a.path() / "transcripts/s-1.jsonl");
  CHECK(std::count(transcript.begin(), transcript.end(), '\n') == 3);
  CHECK(json::parse(transcript.substr(0, transcript.find('\n')))["origin"] == "scripted");
}

TEST_CASE("responses export in long format") {
  TempDir dir;
  const auto in = sample_input();
  export_dataset(in, dir.path());
  const auto text = read_text(dir.path() / "responses.csv");
  // realism has five rows per response.
  std::size_t realism_rows = 0, pos = 0;
  while ((pos = text.find(",realism,", pos)) != std::string::npos) ++realism_rows, ++pos;
  CHECK(realism_rows == 15);
  CHECK(text.find(",authenticity_reason,0,,1,0") != std::string::npos);
}
