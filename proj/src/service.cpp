#include "vpsim/service.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vpsim/annotation.hpp"
#include "vpsim/errors.hpp"

namespace vpsim {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kTokenHeader = "X-Participant-Token";
constexpr std::size_t kMaxBody = 1 << 20;
constexpr std::size_t kTopEmotions = 15;

/// Rejected credentials; kept out of the library's public error hierarchy.
class AuthError : public Error {
 public:
  AuthError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool constant_time_equal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  return diff == 0;
}

ordered_json time_or_null(const std::optional<Timestamp>& t) {
  return t ? ordered_json(to_iso8601(*t)) : ordered_json();
}

ordered_json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return ordered_json::object();
  try {
    auto j = ordered_json::parse(req.body);
    if (!j.is_object()) throw ParseError("request body must be a JSON object");
    return j;
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(std::string("request body: ") + e.what());
  }
}

std::string body_string(const ordered_json& body, const char* key, bool required) {
  if (!body.contains(key) || body.at(key).is_null()) {
    if (required) throw ValidationError({std::string(key) + " is required"});
    return {};
  }
  if (!body.at(key).is_string()) throw ValidationError({std::string(key) + " must be a string"});
  return body.at(key).get<std::string>();
}

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& detail,
                const std::vector<std::string>& violations = {}) {
  ordered_json body{{"code", status}, {"kind", kind}, {"detail", detail}};
  if (!violations.empty()) body["violations"] = violations;
  send_json(res, status, body);
}

}  // namespace

ServiceOptions options_from_config(const ApiConfig& config) {
  ServiceOptions o;
  o.config = config;
  o.admin_token = resolve_secret(config.admin_token_ref).value_or("");
  if (config.provider_kind == ChatProviderKind::scripted)
    o.chat = load_scripted_provider(read_file(config.scripted_fixture));
  else
    o.chat = std::make_shared<OpenAiCompatibleProvider>();
  if (config.affect_provider.kind == AffectProviderKind::lexicon)
    o.affect = std::make_shared<LexiconMockProvider>(
        load_lexicon_mock(read_file(config.affect_provider.lexicon_path)));
  else
    o.affect = std::make_shared<HttpAffectProvider>(config.affect_provider.endpoint_url,
                                                    config.affect_provider.credential_ref,
                                                    config.affect_provider.timeout);
  return o;
}

StudyMaterial load_study_material(const fs::path& root, const std::vector<std::string>& locales) {
  StudyMaterial m;
  m.manifest = std::make_shared<const CategoryManifest>(
      load_manifest_file((root / "category_manifest.json").string()));
  m.scripts = std::make_shared<ScriptRegistry>();

  std::vector<fs::path> files;
  const auto script_dir = root / "scripts";
  if (fs::is_directory(script_dir))
    for (const auto& e : fs::directory_iterator(script_dir))
      if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto script = load_script_file(f.string(), m.manifest);
    if (std::find(locales.begin(), locales.end(), script.locale) != locales.end())
      m.scripts->add(std::move(script));
  }
  for (const auto& locale : locales) {
    if (m.scripts->styles_for(locale).empty())
      throw ValidationError({"no script for locale '" + locale + "' in " + script_dir.string()});
    const auto path = root / "questionnaires" / ("questionnaire." + locale + ".json");
    m.questionnaires.emplace(locale, load_questionnaire_file(path.string()));
  }
  const auto adjective_path = root / "adjective_map.json";
  if (fs::exists(adjective_path)) {
    m.adjective_map = load_adjective_map(read_file(adjective_path));
    for (const auto& [_, q] : m.questionnaires) m.adjective_map->check(q);
  }
  return m;
}

// ---------------------------------------------------------------------------

struct Service::Impl final : EngineObserver {
  ServiceOptions options;
  StudyMaterial material;
  RecordStore store;
  AuditLog audit;
  std::shared_ptr<ChatGateway> gateway;
  std::unique_ptr<ConversationEngine> engine;
  httplib::Server server;
  std::mutex questionnaire_mutex;
  std::mutex affect_mutex;

  explicit Impl(ServiceOptions o)
      : options(std::move(o)),
        material(load_study_material(options.config.storage_path, options.config.locales)),
        store(options.config.storage_path),
        audit(store) {
    if (!options.chat) throw Error("no chat provider configured");
    if (!options.affect) throw Error("no affect provider configured");
    if (!options.clock) options.clock = system_clock();
    check_writable();
    gateway = std::make_shared<ChatGateway>(options.chat, options.config.provider, options.sleeper);
    EngineOptions eo;
    eo.clock = options.clock;
    eo.seed = options.config.seed.value_or(std::random_device{}());
    eo.deterministic_ids = options.config.deterministic_ids;
    engine = std::make_unique<ConversationEngine>(material.scripts, gateway, eo);
    restore();
    engine->set_observer(this);
    routes();
  }

  void check_writable() {
    const auto probe = options.config.storage_path / ".write-probe";
    {
      std::ofstream out(probe, std::ios::trunc);
      if (!out || !(out << "ok")) throw Error("storage_path is not writable: " + options.config.storage_path.string());
    }
    std::error_code ec;
    fs::remove(probe, ec);
  }

  // Brings the audit trail up to the persisted session states. A crash
  // between the session write and its audit write leaves at most one step
  // missing per session.
  void restore() {
    auto sessions = load_sessions(store);
    auto replayed = replay_audit(audit.events());
    for (const auto& s : sessions) {
      auto it = replayed.find(s.session_id);
      std::optional<SessionStatus> from =
          it == replayed.end() ? std::nullopt : std::optional(it->second);
      if (from == s.status) continue;
      if (from && !is_valid_transition(*from, s.status))
        throw StateError("audit trail of " + s.session_id + " cannot reach " + std::string(to_string(s.status)));
      audit.append(options.clock(), s.session_id, from, s.status, "recovered at startup");
    }
    engine->restore(std::move(sessions));
  }

  // EngineObserver
  void session_changed(const Session& s) override {
    store.persist({RecordKind::session, s.session_id, session_payload(s)});
  }
  void message_appended(const Session& s, std::size_t index) override {
    store.persist({RecordKind::transcript_message, transcript_message_id(s.session_id, index),
                   message_payload(s.session_id, index, s.transcript.at(index))});
  }
  void transition(const Session& s, std::optional<SessionStatus> from, SessionStatus to,
                  std::string_view reason) override {
    audit.append(options.clock(), s.session_id, from, to, std::string(reason));
  }

  // --- auth ---------------------------------------------------------------

  Session participant_session(const httplib::Request& req, const std::string& id) {
    const Session s = engine->get(id);
    if (!req.has_header(kTokenHeader)) throw AuthError(401, "participant token required");
    if (!constant_time_equal(req.get_header_value(kTokenHeader), s.participant_token))
      throw AuthError(403, "participant token does not match this session");
    return s;
  }

  bool is_admin(const httplib::Request& req) const {
    if (options.admin_token.empty() || !req.has_header("Authorization")) return false;
    const std::string value = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (!value.starts_with(prefix)) return false;
    return constant_time_equal(std::string_view(value).substr(prefix.size()), options.admin_token);
  }

  void require_admin(const httplib::Request& req) const {
    if (options.admin_token.empty()) throw AuthError(403, "admin routes are disabled");
    if (!req.has_header("Authorization")) throw AuthError(401, "admin token required");
    if (!is_admin(req)) throw AuthError(403, "admin token rejected");
  }

  // --- views --------------------------------------------------------------

  ordered_json participant_view(const Session& s) const {
    ordered_json j;
    j["session_id"] = s.session_id;
    j["status"] = to_string(s.status);
    j["locale"] = s.locale;
    if (const auto* script = material.scripts->find_by_id(s.script_id)) {
      const auto& p = script->persona;
      j["patient"] = {{"name", p.first_name + " " + p.last_name},
                      {"age", p.age},
                      {"occupation", p.occupation}};
    }
    j["messages"] = ordered_json::array();
    for (const auto& m : s.transcript) {
      if (m.role == Role::system) continue;
      const std::string text = m.role == Role::assistant ? strip_for_display(m.content) : m.content;
      j["messages"].push_back({{"role", to_string(m.role)}, {"text", text}});
    }
    j["participant_messages"] = s.participant_message_count();
    return j;
  }

  static ordered_json admin_summary(const Session& s) {
    ordered_json j;
    j["session_id"] = s.session_id;
    j["script_id"] = s.script_id;
    j["style"] = to_string(s.style);
    j["locale"] = s.locale;
    j["status"] = to_string(s.status);
    j["consent_at"] = to_iso8601(s.consent_at);
    j["started_at"] = time_or_null(s.started_at);
    j["ended_at"] = time_or_null(s.ended_at);
    j["duration_ms"] = s.started_at && s.ended_at ? ordered_json((*s.ended_at - *s.started_at).count())
                                                  : ordered_json();
    j["participant_messages"] = s.participant_message_count();
    j["questionnaire_submitted"] = s.questionnaire_submitted;
    j["exclusion_reason"] = s.exclusion_reason ? ordered_json(*s.exclusion_reason) : ordered_json();
    return j;
  }

  static ordered_json affect_view(const SessionAffect& a) {
    ordered_json top = ordered_json::array();
    for (const auto& [name, score] : top_emotions(a.profile, kTopEmotions))
      top.push_back({{"emotion", name}, {"score", score}});
    return {{"session_id", a.session_id},
            {"messages", a.messages.size()},
            {"sentiment", a.sentiment},
            {"top_emotions", top}};
  }

  // --- operations ---------------------------------------------------------

  SessionAffect analyze(const std::string& id) {
    const Session s = engine->get(id);
    SessionAffect out;
    out.session_id = id;
    AffectValidationOptions vo;
    vo.renormalize_word_vectors = options.config.affect_provider.renormalize_word_vectors;
    {
      std::lock_guard lock(affect_mutex);
      for (const auto& m : s.transcript)
        if (m.role == Role::assistant)
          out.messages.push_back(score_message(strip_for_display(m.content), *options.affect, s.locale, vo));
    }
    if (out.messages.empty()) throw ValidationError({"session " + id + " has no patient messages"});
    std::vector<EmotionVector> vectors;
    for (const auto& m : out.messages) vectors.push_back(m.message_vector);
    out.profile = aggregate_profile(vectors);
    out.sentiment = conversation_sentiment(out.messages);
    store.persist({RecordKind::affect_result, id, affect_payload(out)});
    return out;
  }

  ExportInput export_input() const {
    ExportInput in;
    in.sessions = engine->list();
    for (const auto& rec : store.load_all(RecordKind::questionnaire_response))
      in.responses.push_back(response_from_payload(rec.payload));
    for (const auto& rec : store.load_all(RecordKind::affect_result))
      in.affect.push_back(affect_from_payload(rec.payload));
    const auto& first = options.config.locales.front();
    if (auto it = material.questionnaires.find(first); it != material.questionnaires.end())
      in.questionnaire = &it->second;
    if (material.adjective_map) in.adjective_map = &*material.adjective_map;
    return in;
  }

  // --- routing ------------------------------------------------------------

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static httplib::Server::Handler guard(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const AuthError& e) {
        send_error(res, e.status(), e.status() == 401 ? "unauthorized" : "forbidden", e.what());
      } catch (const ValidationError& e) {
        send_error(res, 400, "validation", e.what(), e.violations());
      } catch (const ParseError& e) {
        send_error(res, 400, "bad_request", e.what());
      } catch (const NotFoundError& e) {
        send_error(res, 404, "not_found", e.what());
      } catch (const StateError& e) {
        send_error(res, 409, "conflict", e.what());
      } catch (const GatewayError& e) {
        int status = 502;
        if (e.kind() == GatewayErrorKind::timeout) status = 504;
        if (e.kind() == GatewayErrorKind::rate_limited) status = 503;
        send_error(res, status, "provider_" + std::string(to_string(e.kind())), e.detail());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    server.set_payload_max_length(kMaxBody);
    server.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
      if (options.log) options.log(req.method + " " + req.path + " " + std::to_string(res.status));
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      send_error(res, res.status, res.status == 404 ? "not_found" : "bad_request",
                 httplib::status_message(res.status));
    });

    // Participant routes

    server.Post("/api/sessions", guard([this](const auto& req, auto& res) {
      const auto body = parse_body(req);
      if (!body.contains("consent") || body.at("consent") != true)
        throw ValidationError({"consent must be true"});
      const std::string locale = body_string(body, "locale", true);
      std::optional<SatirStyle> forced;
      if (auto style = body_string(body, "style", false); !style.empty()) {
        require_admin(req);
        forced = parse_style(style);
        if (!forced) throw ValidationError({"unknown style '" + style + "'"});
      }
      const Session s = engine->create_session(locale, forced);
      auto view = participant_view(s);
      view["participant_token"] = s.participant_token;
      send_json(res, 201, view);
    }));

    server.Get(R"(/api/sessions/([A-Za-z0-9._-]+))", guard([this](const auto& req, auto& res) {
      send_json(res, 200, participant_view(participant_session(req, req.matches[1])));
    }));

    server.Post(R"(/api/sessions/([A-Za-z0-9._-]+)/start)", guard([this](const auto& req, auto& res) {
      const std::string id = req.matches[1];
      participant_session(req, id);
      send_json(res, 200, participant_view(engine->start_chat(id)));
    }));

    server.Post(R"(/api/sessions/([A-Za-z0-9._-]+)/messages)", guard([this](const auto& req, auto& res) {
      const std::string id = req.matches[1];
      participant_session(req, id);
      const auto body = parse_body(req);
      const std::string text = body_string(body, "text", true);
      // Participants cannot plant hidden thoughts the model would treat as its own.
      if (text.find(kThoughtDelimiter) != std::string::npos)
        throw ValidationError({"text must not contain " + std::string(kThoughtDelimiter)});
      const auto turn = engine->post_user_message(id, text);
      send_json(res, 200, {{"reply", turn.display_reply}, {"session", participant_view(turn.session)}});
    }));

    server.Post(R"(/api/sessions/([A-Za-z0-9._-]+)/finish)", guard([this](const auto& req, auto& res) {
      const std::string id = req.matches[1];
      participant_session(req, id);
      send_json(res, 200, participant_view(engine->finish_chat(id)));
    }));

    server.Get("/api/questionnaire", guard([this](const auto& req, auto& res) {
      const std::string locale =
          req.has_param("locale") ? req.get_param_value("locale") : options.config.locales.front();
      auto it = material.questionnaires.find(locale);
      if (it == material.questionnaires.end())
        throw NotFoundError("no questionnaire for locale '" + locale + "'");
      res.status = 200;
      res.set_content(serialize_questionnaire(it->second), "application/json");
    }));

    server.Post(R"(/api/sessions/([A-Za-z0-9._-]+)/questionnaire)", guard([this](const auto& req, auto& res) {
      const std::string id = req.matches[1];
      std::lock_guard lock(questionnaire_mutex);
      const Session s = participant_session(req, id);
      if (s.status != SessionStatus::questionnaire || s.questionnaire_submitted)
        throw StateError("session " + id + " is not awaiting a questionnaire");
      const auto body = parse_body(req);
      if (!body.contains("answers") || !body.at("answers").is_object())
        throw ValidationError({"answers must be an object"});
      const auto& q = material.questionnaires.at(s.locale);
      auto response = response_from_json(q, id, body.at("answers").dump(), options.clock());
      if (auto v = validate_response(q, response); !v.empty())
        throw ValidationError("invalid questionnaire response", v);
      store.persist({RecordKind::questionnaire_response, id, response_payload(response)});
      engine->mark_questionnaire_submitted(id);
      send_json(res, 200, participant_view(engine->complete_session(id)));
    }));

    // Admin routes

    server.Get("/api/admin/sessions", guard([this](const auto& req, auto& res) {
      require_admin(req);
      ordered_json list = ordered_json::array();
      for (const auto& s : engine->list()) list.push_back(admin_summary(s));
      send_json(res, 200, {{"sessions", list}});
    }));

    server.Get(R"(/api/admin/sessions/([A-Za-z0-9._-]+)/transcript)", guard([this](const auto& req, auto& res) {
      require_admin(req);
      const Session s = engine->get(req.matches[1]);
      ordered_json messages = ordered_json::array();
      for (std::size_t i = 0; i < s.transcript.size(); ++i) {
        const auto& m = s.transcript[i];
        messages.push_back({{"index", i},
                            {"role", to_string(m.role)},
                            {"origin", to_string(m.origin)},
                            {"content", m.content}});
      }
      auto j = admin_summary(s);
      j["messages"] = std::move(messages);
      send_json(res, 200, j);
    }));

    server.Post(R"(/api/admin/sessions/([A-Za-z0-9._-]+)/exclusion)", guard([this](const auto& req, auto& res) {
      require_admin(req);
      const auto body = parse_body(req);
      const std::string reason = body_string(body, "reason", true);
      if (reason.empty()) throw ValidationError({"reason must not be empty"});
      send_json(res, 200, admin_summary(engine->exclude(req.matches[1], reason)));
    }));

    server.Post("/api/admin/exclusions/apply", guard([this](const auto& req, auto& res) {
      require_admin(req);
      ordered_json changed = ordered_json::array();
      for (const auto& s : engine->list()) {
        const auto next = engine->apply_exclusion_rules(s.session_id);
        if (next.status != s.status) changed.push_back(admin_summary(next));
      }
      send_json(res, 200, {{"excluded", changed}});
    }));

    server.Post("/api/admin/analysis", guard([this](const auto& req, auto& res) {
      require_admin(req);
      const auto body = parse_body(req);
      const std::string id = body_string(body, "session_id", false);
      const std::string style_text = body_string(body, "style", false);
      if (id.empty() == style_text.empty())
        throw ValidationError({"give exactly one of session_id or style"});
      std::vector<SessionAffect> results;
      if (!id.empty()) {
        results.push_back(analyze(id));
      } else {
        auto style = parse_style(style_text);
        if (!style) throw ValidationError({"unknown style '" + style_text + "'"});
        for (const auto& s : engine->list())
          if (s.style == *style && s.status != SessionStatus::excluded && s.started_at)
            results.push_back(analyze(s.session_id));
      }
      ordered_json out;
      out["sessions"] = ordered_json::array();
      std::vector<EmotionVector> profiles;
      std::vector<double> sentiment;
      for (const auto& a : results) {
        out["sessions"].push_back(affect_view(a));
        profiles.push_back(a.profile);
        sentiment.push_back(a.sentiment);
      }
      if (!profiles.empty()) {
        ordered_json top = ordered_json::array();
        for (const auto& [name, score] : top_emotions(aggregate_profile(profiles), kTopEmotions))
          top.push_back({{"emotion", name}, {"score", score}});
        const auto ms = mean_std(sentiment);
        out["cohort"] = {{"sessions", profiles.size()},
                         {"sentiment", {{"mean", ms.mean}, {"std", ms.std}}},
                         {"top_emotions", top}};
      } else {
        out["cohort"] = nullptr;
      }
      send_json(res, 200, out);
    }));

    server.Get("/api/admin/metrics", guard([this](const auto& req, auto& res) {
      require_admin(req);
      auto metrics = ordered_json::parse(compute_metrics_json(export_input()));
      if (req.has_param("style")) {
        const auto style = req.get_param_value("style");
        if (!parse_style(style)) throw ValidationError({"unknown style '" + style + "'"});
        if (!metrics["styles"].contains(style)) throw NotFoundError("no sessions with style '" + style + "'");
        metrics = metrics["styles"][style];
      }
      send_json(res, 200, metrics);
    }));

    server.Post("/api/admin/export", guard([this](const auto& req, auto& res) {
      require_admin(req);
      const auto body = parse_body(req);
      std::string name = body_string(body, "name", false);
      if (name.empty()) name = "latest";
      if (!is_valid_record_id(name)) throw ValidationError({"invalid export name '" + name + "'"});
      const auto dir = options.config.storage_path / "exports" / name;
      const auto files = export_dataset(export_input(), dir);
      send_json(res, 200, {{"directory", "exports/" + name}, {"files", files}});
    }));
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::listen() {
  if (!impl_->server.listen_after_bind()) throw Error("server stopped with an error");
}

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

bool Service::is_running() const { return impl_->server.is_running(); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

ConversationEngine& Service::engine() { return *impl_->engine; }
const RecordStore& Service::store() const { return impl_->store; }
const StudyMaterial& Service::material() const { return impl_->material; }

SessionAffect Service::analyze_session(const std::string& session_id) { return impl_->analyze(session_id); }
ExportInput Service::export_input() const { return impl_->export_input(); }

}  // namespace vpsim
