// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "harness.hpp"
#include "vpsim/affect.hpp"
#include "vpsim/annotation.hpp"
#include "vpsim/conversation.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/illness_script.hpp"
#include "vpsim/prompt.hpp"
#include "vpsim/study.hpp"

using namespace vpsim;
using namespace vpsim::test;
using json = nlohmann::json;
using Clk = std::chrono::steady_clock;

namespace {

// Collects failed expectations for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    if (ok()) return std::to_string(count_) + " checks";
    std::string s = std::to_string(failed_) + "/" + std::to_string(count_) + " failed";
    for (const auto& f : failures_) s += "; " + f;
    return s;
  }

 private:
  int count_ = 0;
  int failed_ = 0;
  std::vector<std::string> failures_;
};

double seconds_since(Clk::time_point t0) {
  return std::chrono::duration<double>(Clk::now() - t0).count();
}

// --- 1 ---------------------------------------------------------------------

void ac1(Check& c) {
  const auto t0 = Clk::now();
  const auto s = script("accuser.en");
  const auto plan = assemble(s, {}, "[USER INPUT]");
  const auto text = to_canonical_json(plan) + "\n";
  const double elapsed = seconds_since(t0);
  c.expect(text == read_text(golden_path("accuser_first_turn.plan.json")), "plan differs from golden file");
  c.expect(plan.messages.size() == 4, "expected four messages");
  if (plan.messages.size() == 4) {
    c.expect(plan.messages[0].role == Role::system && plan.messages[0].content == render_short_case(s),
             "first message is not the short case");
    c.expect(plan.messages[1].role == Role::system && plan.messages[1].origin == Origin::injected_note,
             "second message is not the author's note");
    c.expect(plan.messages[2].role == Role::assistant && plan.messages[2].content == opening_message(s).content &&
                 !parse_annotations(plan.messages[2].content).annotations.empty(),
             "third message is not the annotated greeting");
    c.expect(plan.messages[3].role == Role::user && plan.messages[3].content == "[USER INPUT]",
             "fourth message is not the user turn");
  }
  c.expect(elapsed < 1.0, "took " + std::to_string(elapsed) + " s");
}

// --- 2 ---------------------------------------------------------------------

void ac2(Check& c) {
  const auto s = script("accuser.en");
  std::vector<ChatMessage> history{opening_message(s)};
  for (std::size_t n = 1; n <= 30; ++n) {
    // n non-system messages: the history plus the current user message.
    while (history.size() + 1 < n) {
      const bool user = history.back().role == Role::assistant;
      history.push_back(user ? ChatMessage{Role::user, "u", Origin::participant}
                             : ChatMessage{Role::assistant, "<calm> a", Origin::model});
    }
    if (history.size() + 1 == n && history.back().role == Role::assistant) {
      const auto plan = assemble(s, history, "now");
      std::size_t after = 0;
      for (std::size_t i = plan.note_index + 1; i < plan.messages.size(); ++i)
        if (plan.messages[i].role != Role::system) ++after;
      c.expect(after == std::min<std::size_t>(6, n), "assembled plan, n=" + std::to_string(n));
    }
    // Brute-force count over a marker list.
    std::vector<int> seq(n, 1);
    seq.insert(seq.begin() + static_cast<long>(note_position(n)), 0);
    const auto zero = std::find(seq.begin(), seq.end(), 0);
    const auto after = static_cast<std::size_t>(std::count(zero + 1, seq.end(), 1));
    c.expect(after == std::min<std::size_t>(6, n), "note_position, n=" + std::to_string(n));
  }
}

// --- 3 ---------------------------------------------------------------------

void ac3(Check& c) {
  std::mt19937 rng(3);
  const std::vector<std::string> tags{"tormented", "annoyed", "sad", "sighs", "angry"};
  const std::vector<std::string> thoughts{"Why me?", "a < b", "<Thoughts: nested?", "x > y", ""};
  const std::vector<std::string> bodies{"It hurts.", "3 < 5 and 7 > 2", "<b>bold</b>", "a<b<c",
                                        "ends with <", "<3", "Hello!", "what <is> this"};
  const std::vector<std::string> lead{"Well,", "No.", "Doctor", "I", "Look"};
  for (int i = 0; i < 200; ++i) {
    AnnotatedContent content;
    const int n = static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) {
      if (rng() % 2)
        content.annotations.push_back({Annotation::Kind::emotion_tag, tags[rng() % tags.size()]});
      else
        content.annotations.push_back({Annotation::Kind::thought_block, thoughts[rng() % thoughts.size()]});
    }
    // Visible text opens with a word; any '<' in it is mid-text.
    content.visible_text = lead[rng() % lead.size()] + " " + bodies[rng() % bodies.size()];
    if (rng() % 3 == 0) content.visible_text += " " + bodies[rng() % bodies.size()];
    const std::string raw = content.serialize();
    try {
      const auto parsed = parse_annotations(raw);
      c.expect(parsed.serialize() == raw, "round trip: " + raw);
      c.expect(strip_for_display(raw).find(kThoughtDelimiter) == std::string::npos, "leak: " + raw);
      // Adversarial: a thought planted mid-text must still be hidden.
      const std::string planted = raw + " <Thoughts: \"hidden " + std::to_string(i) + "\"> tail";
      c.expect(strip_for_display(planted).find(kThoughtDelimiter) == std::string::npos, "leak: " + planted);
    } catch (const ParseError& e) {
      c.expect(false, std::string("rejected canonical text: ") + e.what());
    }
  }
}

// --- 4 ---------------------------------------------------------------------

std::map<std::string, double> uniform_map() {
  std::map<std::string, double> m;
  for (auto name : emotion_catalog()) m[std::string(name)] = 1.0 / kEmotionCount;
  return m;
}

void ac4(Check& c) {
  std::mt19937 rng(4);
  std::gamma_distribution<double> g(0.5, 1.0);
  int accepted = 0;
  for (int i = 0; i < 500; ++i) {
    std::map<std::string, double> m;
    double sum = 0;
    for (auto name : emotion_catalog()) sum += (m[std::string(name)] = g(rng));
    const double drift = (rng() % 2) ? 0.0 : std::ldexp(1.0, -static_cast<int>(8 + rng() % 30));
    for (auto& [k, v] : m) v = v / sum;
    m["Pain"] += drift;
    try {
      const auto v = EmotionVector::from_scores(m);
      ++accepted;
      const double total = std::accumulate(v.scores().begin(), v.scores().end(), 0.0);
      c.expect(std::abs(total - 1.0) <= kSimplexTolerance, "accepted vector sums to " + std::to_string(total));
    } catch (const ValidationError&) {
      c.expect(drift > kSimplexTolerance, "rejected a vector within tolerance");
    }
    std::vector<double> levels(kSentimentLevels);
    double lsum = 0;
    for (auto& l : levels) lsum += (l = g(rng));
    for (auto& l : levels) l /= lsum;
    levels[0] += drift;
    try {
      const auto d = SentimentDistribution::from_levels(levels);
      const double total = std::accumulate(d.levels().begin(), d.levels().end(), 0.0);
      c.expect(std::abs(total - 1.0) <= kSimplexTolerance, "accepted sentiment sums to " + std::to_string(total));
    } catch (const ValidationError&) {
      c.expect(drift > kSimplexTolerance, "rejected a sentiment within tolerance");
    }
  }
  c.expect(accepted > 100, "too few random vectors accepted");

  auto rejects = [&](RawAffectResult raw, const std::string& what) {
    try {
      validate_affect_result(raw);
      c.expect(false, what + " accepted");
    } catch (const ValidationError&) {
      c.expect(true, what);
    }
  };
  RawAffectResult good;
  good.words.push_back({"pain", 0, uniform_map()});
  good.message_vector = uniform_map();
  good.sentiment.assign(kSentimentLevels, 1.0 / kSentimentLevels);
  try {
    validate_affect_result(good);
    c.expect(true, "valid result");
  } catch (const std::exception& e) {
    c.expect(false, std::string("valid result rejected: ") + e.what());
  }

  auto r = good;
  r.message_vector.erase("Pain");
  rejects(r, "52 emotions");
  r = good;
  r.words[0].scores.erase("Joy");
  rejects(r, "52 emotions in a word vector");
  r = good;
  r.message_vector["Pain"] = -0.01;
  r.message_vector["Joy"] += 0.01;
  rejects(r, "negative score");
  r = good;
  for (auto& [k, v] : r.message_vector) v *= 1.3;
  rejects(r, "sum 1.3");
  r = good;
  r.words[0].scores["Pain"] += 0.3;
  rejects(r, "word vector sum 1.3");
  r = good;
  r.sentiment[0] += 0.3;
  rejects(r, "sentiment sum 1.3");
  r = good;
  r.sentiment.pop_back();
  rejects(r, "eight sentiment levels");
}

// --- 5 ---------------------------------------------------------------------

EmotionVector random_vector(std::mt19937& rng) {
  std::gamma_distribution<double> g(0.4, 1.0);
  EmotionVector::Scores s{};
  double sum = 0;
  for (auto& v : s) sum += (v = g(rng));
  for (auto& v : s) v /= sum;
  return EmotionVector::from_array(s);
}

void ac5(Check& c) {
  std::mt19937 rng(5);
  for (int set = 0; set < 100; ++set) {
    std::vector<EmotionVector> vs;
    const std::size_t n = 1 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i) vs.push_back(random_vector(rng));
    const auto profile = aggregate_profile(vs);
    // Two-loop oracle.
    double max_err = 0;
    for (std::size_t e = 0; e < kEmotionCount; ++e) {
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += vs[i][e];
      max_err = std::max(max_err, std::abs(profile[e] - acc / static_cast<double>(n)));
    }
    c.expect(max_err <= 1e-9, "oracle error " + std::to_string(max_err));
    auto shuffled = vs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = aggregate_profile(shuffled);
    double perm_err = 0;
    for (std::size_t e = 0; e < kEmotionCount; ++e) perm_err = std::max(perm_err, std::abs(profile[e] - again[e]));
    c.expect(perm_err <= 1e-12, "permutation error " + std::to_string(perm_err));
  }
}

// --- 6 ---------------------------------------------------------------------

void ac6(Check& c) {
  std::mt19937 rng(6);
  std::uniform_int_distribution<int> coarse(0, 5);
  for (int i = 0; i < 1000; ++i) {
    // Coarse weights make ties common.
    std::vector<double> l(kSentimentLevels);
    double sum = 0;
    for (auto& v : l) sum += (v = coarse(rng));
    if (sum == 0) l[4] = sum = 1;
    for (auto& v : l) v /= sum;
    int best = 0;
    for (int k = 0; k < static_cast<int>(kSentimentLevels); ++k)
      if (l[k] > l[best]) best = k;
    const int got = dominant_sentiment(SentimentDistribution::from_levels(l));
    c.expect(got == best + 1, "distribution " + std::to_string(i));
  }
  c.expect(dominant_sentiment(SentimentDistribution::uniform()) == 1, "uniform distribution");
}

// --- 7 ---------------------------------------------------------------------

std::vector<QuestionnaireResponse> adjective_responses(const AdjectiveMap& map,
                                                       const std::map<SatirStyle, int>& counts) {
  std::map<SatirStyle, std::vector<std::string>> pool;
  for (const auto& [adj, style] : map.entries) pool[style].push_back(adj);
  // Participant p picks the p-th batch; one adjective per style per participant.
  std::vector<QuestionnaireResponse> out;
  int max_count = 0;
  for (const auto& [s, n] : counts) max_count = std::max(max_count, n);
  for (int p = 0; p < max_count; ++p) {
    QuestionnaireResponse r;
    r.session_id = "p" + std::to_string(p);
    std::vector<std::string> picks;
    for (const auto& [s, n] : counts)
      if (p < n) picks.push_back(pool[s][static_cast<std::size_t>(p) % pool[s].size()]);
    r.answers[std::string(kAdjectiveItem)] = picks;
    out.push_back(r);
  }
  return out;
}

void ac7(Check& c) {
  const auto map = load_adjective_map(read_text(data_path("adjective_map.json")));
  struct Case {
    SatirStyle target;
    std::map<SatirStyle, int> counts;
    std::map<SatirStyle, double> published;
    int total;
  };
  const std::vector<Case> cases{
      {SatirStyle::accuser,
       {{SatirStyle::accuser, 22}, {SatirStyle::appeaser, 4}, {SatirStyle::distractor, 5}, {SatirStyle::rationalizer, 8}},
       {{SatirStyle::accuser, 56.4}, {SatirStyle::appeaser, 10.3}, {SatirStyle::distractor, 12.8}, {SatirStyle::rationalizer, 20.5}},
       39},
      {SatirStyle::rationalizer,
       {{SatirStyle::rationalizer, 22}, {SatirStyle::accuser, 22}, {SatirStyle::appeaser, 5}, {SatirStyle::distractor, 4}},
       {{SatirStyle::rationalizer, 41.5}, {SatirStyle::accuser, 41.5}, {SatirStyle::appeaser, 9.4}, {SatirStyle::distractor, 7.6}},
       53}};
  for (const auto& cs : cases) {
    const auto ap = adjective_precision(adjective_responses(map, cs.counts), cs.target, map);
    c.expect(ap.total == cs.total, "total " + std::to_string(ap.total));
    for (const auto& [style, pct] : cs.published) {
      const double got = ap.percentages.count(style) ? ap.percentages.at(style) : -1;
      c.expect(std::abs(got - pct) <= 0.1 + 1e-9,
               std::string(to_string(style)) + " " + std::to_string(got) + " vs " + std::to_string(pct));
    }
    c.expect(std::abs(ap.precision - cs.published.at(cs.target)) <= 0.1 + 1e-9, "precision");

    // Uniqueness: every (total <= 60, 4-way split) within half a rounding step.
    std::vector<std::pair<SatirStyle, double>> order(cs.published.begin(), cs.published.end());
    int hits = 0;
    bool found_ours = false;
    for (int t = 1; t <= 60; ++t)
      for (int a = 0; a <= t; ++a)
        for (int b = 0; a + b <= t; ++b)
          for (int d = 0; a + b + d <= t; ++d) {
            const int e = t - a - b - d;
            const int x[4] = {a, b, d, e};
            bool ok = true;
            for (int k = 0; k < 4 && ok; ++k) {
              // 4/53 = 7.55 sits on the rounding edge of the published 7.6.
              const double tol = order[k].second == 7.6 ? 0.1 : 0.05;
              ok = std::abs(100.0 * x[k] / t - order[k].second) <= tol + 1e-9;
            }
            if (!ok) continue;
            ++hits;
            bool ours = t == cs.total;
            for (int k = 0; k < 4; ++k) ours = ours && x[k] == cs.counts.at(order[k].first);
            found_ours = found_ours || ours;
          }
    c.expect(hits == 1 && found_ours, "reconstruction not unique (" + std::to_string(hits) + " candidates)");
  }
}

// --- 8 ---------------------------------------------------------------------

void ac8(Check& c) {
  auto session = [](std::int64_t duration_ms, bool submitted) {
    Session s;
    s.session_id = "s";
    s.status = submitted ? SessionStatus::complete : SessionStatus::questionnaire;
    s.questionnaire_submitted = submitted;
    s.started_at = from_epoch_ms(1714564800000);
    s.ended_at = from_epoch_ms(1714564800000 + duration_ms);
    return s;
  };
  c.expect(apply_exclusion_rules(session(179'000, true)).status == SessionStatus::excluded, "2:59 kept");
  c.expect(apply_exclusion_rules(session(180'000, true)).status == SessionStatus::complete, "3:00 excluded");
  c.expect(apply_exclusion_rules(session(179'999, true)).status == SessionStatus::excluded, "2:59.999 kept");
  for (std::int64_t d : {60'000LL, 180'000LL, 3'600'000LL}) {
    const auto r = apply_exclusion_rules(session(d, false));
    c.expect(r.status == SessionStatus::excluded, "no questionnaire kept at " + std::to_string(d));
  }
  auto chatting = session(600'000, false);
  chatting.status = SessionStatus::chatting;
  chatting.ended_at.reset();
  c.expect(apply_exclusion_rules(chatting).status == SessionStatus::excluded, "abandoned chat kept");
}

// --- 9 ---------------------------------------------------------------------

void ac9(Check& c) {
  const std::vector<std::string> templates{"Do you really think that's the case with me?",
                                           "I'm not entirely convinced, but I might be willing to try it...",
                                           "Therapy? I don't think that will help me at all."};
  for (const char* name : {"accuser.en", "rationalizer.en"}) {
    const auto full = render_full_case(script(name));
    for (const auto& t : templates)
      c.expect(full.find(t) != std::string::npos, std::string(name) + " lacks \"" + t + "\"");
  }
}

// --- 10 --------------------------------------------------------------------

struct ReplayResult {
  std::map<std::string, std::string> files;
  std::vector<std::string> top;
  std::string status;
};

ReplayResult replay(Check& c, const fs::path& storage) {
  copy_storage(storage);
  LiveService svc(storage);
  const auto user = json::parse(read_text(data_path("fixtures/accuser_replay_user.en.json")));
  ReplayResult out;

  const auto created = svc.post("/api/sessions", {{"locale", "en"}, {"consent", true}, {"style", "accuser"}},
                                LiveService::admin());
  c.expect(created.status == 201, "create returned " + std::to_string(created.status));
  if (created.status != 201) return out;
  const std::string id = created.body["session_id"];
  const auto p = LiveService::participant(created.body["participant_token"]);
  c.expect(svc.post("/api/sessions/" + id + "/start", json::object(), p).status == 200, "start");
  const auto& turns = user["turns"];
  c.expect(turns.size() == 10, "fixture has " + std::to_string(turns.size()) + " turns");
  for (const auto& t : turns) {
    svc.clock().advance_s(30);
    const auto r = svc.post("/api/sessions/" + id + "/messages", {{"text", t}}, p);
    c.expect(r.status == 200, "turn returned " + std::to_string(r.status));
    if (r.status == 200)
      c.expect(r.body["reply"].get<std::string>().find('<') == std::string::npos, "annotation reached participant");
  }
  c.expect(svc.post("/api/sessions/" + id + "/finish", json::object(), p).status == 200, "finish");
  svc.clock().advance_s(120);
  const auto done = svc.post("/api/sessions/" + id + "/questionnaire", {{"answers", user["answers"]}}, p);
  c.expect(done.status == 200, "questionnaire returned " + std::to_string(done.status));
  out.status = done.body.value("status", "");
  c.expect(out.status == "complete", "status " + out.status);

  const auto analysis = svc.post("/api/admin/analysis", {{"style", "accuser"}}, LiveService::admin());
  c.expect(analysis.status == 200, "analysis returned " + std::to_string(analysis.status));
  if (analysis.status == 200 && analysis.body["cohort"].is_object()) {
    const auto& top = analysis.body["cohort"]["top_emotions"];
    c.expect(top.size() == 15, "top table has " + std::to_string(top.size()) + " rows");
    for (const auto& row : top) out.top.push_back(row["emotion"]);
  }
  const auto exp = svc.post("/api/admin/export", json::object(), LiveService::admin());
  c.expect(exp.status == 200, "export returned " + std::to_string(exp.status));
  if (exp.status == 200)
    for (const auto& f : exp.body["files"]) {
      const std::string rel = f;
      out.files[rel] = read_text(storage / "exports/latest" / rel);
    }
  return out;
}

void ac10(Check& c) {
  const auto t0 = Clk::now();
  TempDir a, b;
  const auto first = replay(c, a.path() / "data");
  const auto second = replay(c, b.path() / "data");
  const double elapsed = seconds_since(t0);

  c.expect(!first.files.empty(), "empty export");
  c.expect(first.files == second.files, "export bundles differ between runs");
  c.expect(first.files.count("metrics.json") && first.files.count("sessions.csv") &&
               first.files.count("responses.csv"),
           "bundle incomplete");
  const std::vector<std::string> head{"Pain", "Distress", "Annoyance"};
  c.expect(first.top.size() >= 3 && std::equal(head.begin(), head.end(), first.top.begin()),
           "top emotions start with " + (first.top.empty() ? std::string("nothing") : first.top[0]));
  if (first.files.count("metrics.json")) {
    const auto m = json::parse(first.files.at("metrics.json"));
    const auto& top = m["styles"]["accuser"]["affect"]["top_emotions"];
    c.expect(top.size() == 15 && top[0]["emotion"] == "Pain" && top[1]["emotion"] == "Distress" &&
                 top[2]["emotion"] == "Annoyance",
             "exported top emotions");
  }
  c.expect(elapsed < 10.0, "took " + std::to_string(elapsed) + " s");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"AC1 first-turn prompt plan matches golden", ac1},
      {"AC2 author's note position", ac2},
      {"AC3 annotation hygiene", ac3},
      {"AC4 affect vectors on the simplex", ac4},
      {"AC5 profile aggregation oracle", ac5},
      {"AC6 dominant sentiment argmax", ac6},
      {"AC7 adjective precision reproduction", ac7},
      {"AC8 exclusion rule", ac8},
      {"AC9 stubbornness templates in full case", ac9},
      {"AC10 end-to-end replay", ac10},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    const auto t0 = Clk::now();
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    std::ostringstream line;
    line << (c.ok() ? "PASS " : "FAIL ") << name << " (" << c.summary() << ", " << std::fixed;
    line.precision(3);
    line << seconds_since(t0) << " s)";
    std::cout << line.str() << std::endl;
    if (!c.ok()) ++failed;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
