#include "vpsim/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "vpsim/errors.hpp"

namespace vpsim {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<RecordKind, 5> kKinds{RecordKind::session, RecordKind::transcript_message,
                                           RecordKind::questionnaire_response,
                                           RecordKind::affect_result, RecordKind::audit_event};
constexpr std::string_view kTmpSuffix = ".tmp";

json parse_payload(std::string_view payload, std::string_view what) {
  try {
    return json::parse(payload);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

[[noreturn]] void io_error(const std::string& what) {
  throw Error(what + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string& data, const std::string& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_error("write " + path);
    }
    off += static_cast<std::size_t>(n);
  }
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) io_error("open " + dir.string());
  ::fsync(fd);
  ::close(fd);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<std::int64_t> opt_ms(const std::optional<Timestamp>& t) {
  if (!t) return std::nullopt;
  return to_epoch_ms(*t);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

std::optional<Timestamp> get_time(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return from_epoch_ms(j.at(key).get<std::int64_t>());
}

json emotion_array(const EmotionVector& v) { return json(v.scores()); }

EmotionVector emotion_from_array(const json& j) {
  if (!j.is_array() || j.size() != kEmotionCount) throw ParseError("expected 53 emotion scores");
  EmotionVector::Scores s{};
  for (std::size_t i = 0; i < kEmotionCount; ++i) s[i] = j.at(i).get<double>();
  return EmotionVector::from_array(s);
}

}  // namespace

std::string_view to_string(RecordKind k) noexcept {
  switch (k) {
    case RecordKind::session: return "session";
    case RecordKind::transcript_message: return "transcript_message";
    case RecordKind::questionnaire_response: return "questionnaire_response";
    case RecordKind::affect_result: return "affect_result";
    case RecordKind::audit_event: return "audit_event";
  }
  return "session";
}

std::optional<RecordKind> parse_record_kind(std::string_view text) noexcept {
  for (auto k : kKinds)
    if (to_string(k) == text) return k;
  return std::nullopt;
}

bool is_valid_record_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_' || c == '.';
  });
}

RecordStore::RecordStore(fs::path root) : root_(std::move(root)) {
  for (auto k : kKinds) {
    const auto dir = root_ / "records" / std::string(to_string(k));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.size() > kTmpSuffix.size() && name.ends_with(kTmpSuffix)) fs::remove(entry.path(), ec);
    }
  }
}

fs::path RecordStore::path_for(RecordKind kind, std::string_view id) const {
  return root_ / "records" / std::string(to_string(kind)) / (std::string(id) + ".json");
}

void RecordStore::persist(const StoredRecord& record) {
  if (!is_valid_record_id(record.id))
    throw ValidationError({"invalid record id '" + record.id + "'"});
  ordered_json doc;
  doc["kind"] = to_string(record.kind);
  doc["id"] = record.id;
  doc["schema"] = record.schema;
  try {
    doc["payload"] = ordered_json::parse(record.payload);
  } catch (const ordered_json::parse_error&) {
    throw ValidationError({"payload of " + record.id + " is not JSON"});
  }
  const std::string data = doc.dump(1) + "\n";

  const fs::path target = path_for(record.kind, record.id);
  // Unique per thread so concurrent writers of one id never share a temp file.
  std::ostringstream tmp_name;
  tmp_name << target.filename().string() << "." << ::getpid() << "."
           << std::hash<std::thread::id>{}(std::this_thread::get_id()) << kTmpSuffix;
  const fs::path tmp = target.parent_path() / tmp_name.str();

  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) io_error("open " + tmp.string());
  try {
    write_all(fd, data, tmp.string());
    if (::fsync(fd) != 0) io_error("fsync " + tmp.string());
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), target.c_str()) != 0) {
    const int saved = errno;
    ::unlink(tmp.c_str());
    errno = saved;
    io_error("rename " + target.string());
  }
  fsync_dir(target.parent_path());
}

bool RecordStore::contains(RecordKind kind, std::string_view id) const {
  return is_valid_record_id(id) && fs::exists(path_for(kind, id));
}

StoredRecord RecordStore::load(RecordKind kind, std::string_view id) const {
  if (!contains(kind, id))
    throw NotFoundError(std::string(to_string(kind)) + " '" + std::string(id) + "' not found");
  const auto path = path_for(kind, id);
  const json doc = parse_payload(read_file(path), path.string());
  StoredRecord r;
  r.kind = kind;
  r.id = doc.at("id").get<std::string>();
  r.schema = doc.at("schema").get<int>();
  if (r.schema > kRecordSchema)
    throw ParseError(path.string() + ": schema " + std::to_string(r.schema) + " is newer than supported");
  r.payload = doc.at("payload").dump();
  return r;
}

std::vector<std::string> RecordStore::ids(RecordKind kind) const {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(root_ / "records" / std::string(to_string(kind)))) {
    const auto name = entry.path().filename().string();
    if (!name.ends_with(".json")) continue;
    out.push_back(name.substr(0, name.size() - 5));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<StoredRecord> RecordStore::load_all(RecordKind kind) const {
  std::vector<StoredRecord> out;
  for (const auto& id : ids(kind)) out.push_back(load(kind, id));
  return out;
}

// ---------------------------------------------------------------------------

std::string session_payload(const Session& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["participant_token"] = s.participant_token;
  j["script_id"] = s.script_id;
  j["style"] = to_string(s.style);
  j["locale"] = s.locale;
  j["consent_at"] = to_epoch_ms(s.consent_at);
  j["started_at"] = opt_ms(s.started_at) ? ordered_json(*opt_ms(s.started_at)) : ordered_json();
  j["ended_at"] = opt_ms(s.ended_at) ? ordered_json(*opt_ms(s.ended_at)) : ordered_json();
  j["status"] = to_string(s.status);
  j["questionnaire_submitted"] = s.questionnaire_submitted;
  j["exclusion_reason"] = s.exclusion_reason ? ordered_json(*s.exclusion_reason) : ordered_json();
  j["messages"] = s.transcript.size();
  return j.dump();
}

Session session_from_payload(std::string_view payload) {
  const json j = parse_payload(payload, "session");
  Session s;
  try {
    s.session_id = j.at("session_id").get<std::string>();
    s.participant_token = j.at("participant_token").get<std::string>();
    s.script_id = j.at("script_id").get<std::string>();
    auto style = parse_style(j.at("style").get<std::string>());
    auto status = parse_session_status(j.at("status").get<std::string>());
    if (!style || !status) throw ParseError("session " + s.session_id + ": bad style or status");
    s.style = *style;
    s.status = *status;
    s.locale = j.at("locale").get<std::string>();
    s.consent_at = from_epoch_ms(j.at("consent_at").get<std::int64_t>());
    s.started_at = get_time(j, "started_at");
    s.ended_at = get_time(j, "ended_at");
    s.questionnaire_submitted = get_or(j, "questionnaire_submitted", false);
    if (j.contains("exclusion_reason") && !j.at("exclusion_reason").is_null())
      s.exclusion_reason = j.at("exclusion_reason").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("session payload: ") + e.what());
  }
  return s;
}

std::string transcript_message_id(std::string_view session_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return std::string(session_id) + "." + buf;
}

std::string message_payload(std::string_view session_id, std::size_t index, const ChatMessage& m) {
  ordered_json j;
  j["session_id"] = session_id;
  j["index"] = index;
  j["role"] = to_string(m.role);
  j["origin"] = to_string(m.origin);
  j["content"] = m.content;
  return j.dump();
}

StoredMessage message_from_payload(std::string_view payload) {
  const json j = parse_payload(payload, "transcript message");
  StoredMessage out;
  try {
    out.session_id = j.at("session_id").get<std::string>();
    out.index = j.at("index").get<std::size_t>();
    auto role = parse_role(j.at("role").get<std::string>());
    auto origin = parse_origin(j.at("origin").get<std::string>());
    if (!role || !origin) throw ParseError("transcript message: bad role or origin");
    out.message = {*role, j.at("content").get<std::string>(), *origin};
  } catch (const json::exception& e) {
    throw ParseError(std::string("transcript message payload: ") + e.what());
  }
  return out;
}

std::string response_payload(const QuestionnaireResponse& r) {
  ordered_json j;
  j["session_id"] = r.session_id;
  j["submitted_at"] = to_epoch_ms(r.submitted_at);
  // Answers are typed by shape: int, [int], string, [string], null.
  ordered_json answers = ordered_json::object();
  for (const auto& [id, value] : r.answers) {
    std::visit(
        [&, &key = id](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Skipped>) answers[key] = nullptr;
          else answers[key] = v;
        },
        value);
  }
  j["answers"] = std::move(answers);
  return j.dump();
}

QuestionnaireResponse response_from_payload(std::string_view payload) {
  const json j = parse_payload(payload, "questionnaire response");
  QuestionnaireResponse r;
  try {
    r.session_id = j.at("session_id").get<std::string>();
    r.submitted_at = from_epoch_ms(j.at("submitted_at").get<std::int64_t>());
    for (const auto& [id, v] : j.at("answers").items()) {
      if (v.is_null()) r.answers[id] = Skipped{};
      else if (v.is_number_integer()) r.answers[id] = v.get<int>();
      else if (v.is_string()) r.answers[id] = v.get<std::string>();
      else if (v.is_array() && !v.empty() && v.front().is_number_integer())
        r.answers[id] = v.get<std::vector<int>>();
      else if (v.is_array()) r.answers[id] = v.get<std::vector<std::string>>();
      else throw ParseError("questionnaire response: bad answer for " + id);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("questionnaire response payload: ") + e.what());
  }
  return r;
}

std::string affect_payload(const SessionAffect& a) {
  json j;
  j["session_id"] = a.session_id;
  j["profile"] = emotion_array(a.profile);
  j["sentiment"] = a.sentiment;
  j["messages"] = json::array();
  for (const auto& m : a.messages) {
    json mj;
    mj["message_vector"] = emotion_array(m.message_vector);
    mj["sentiment"] = m.sentiment.levels();
    mj["words"] = json::array();
    for (const auto& w : m.words)
      mj["words"].push_back({{"token", w.token}, {"position", w.position}, {"scores", emotion_array(w.scores)}});
    j["messages"].push_back(std::move(mj));
  }
  return j.dump();
}

SessionAffect affect_from_payload(std::string_view payload) {
  const json j = parse_payload(payload, "affect result");
  SessionAffect a;
  try {
    a.session_id = j.at("session_id").get<std::string>();
    a.profile = emotion_from_array(j.at("profile"));
    a.sentiment = j.at("sentiment").get<double>();
    for (const auto& mj : j.at("messages")) {
      ScoredMessage m;
      m.message_vector = emotion_from_array(mj.at("message_vector"));
      const auto levels = mj.at("sentiment").get<std::vector<double>>();
      m.sentiment = SentimentDistribution::from_levels(levels);
      for (const auto& w : mj.at("words"))
        m.words.push_back({w.at("token").get<std::string>(), w.at("position").get<std::size_t>(),
                           emotion_from_array(w.at("scores"))});
      a.messages.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("affect payload: ") + e.what());
  }
  return a;
}

std::string audit_event_id(std::uint64_t sequence) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%012llu", static_cast<unsigned long long>(sequence));
  return buf;
}

std::string audit_payload(const AuditEvent& e) {
  ordered_json j;
  j["sequence"] = e.sequence;
  j["at"] = to_epoch_ms(e.at);
  j["session_id"] = e.session_id;
  j["from"] = e.from ? ordered_json(to_string(*e.from)) : ordered_json();
  j["to"] = to_string(e.to);
  j["reason"] = e.reason;
  return j.dump();
}

AuditEvent audit_from_payload(std::string_view payload) {
  const json j = parse_payload(payload, "audit event");
  AuditEvent e;
  try {
    e.sequence = j.at("sequence").get<std::uint64_t>();
    e.at = from_epoch_ms(j.at("at").get<std::int64_t>());
    e.session_id = j.at("session_id").get<std::string>();
    if (!j.at("from").is_null()) {
      e.from = parse_session_status(j.at("from").get<std::string>());
      if (!e.from) throw ParseError("audit event: bad from status");
    }
    auto to = parse_session_status(j.at("to").get<std::string>());
    if (!to) throw ParseError("audit event: bad to status");
    e.to = *to;
    e.reason = get_or<std::string>(j, "reason", "");
  } catch (const json::exception& ex) {
    throw ParseError(std::string("audit payload: ") + ex.what());
  }
  return e;
}

std::map<std::string, SessionStatus> replay_audit(std::vector<AuditEvent> events) {
  std::sort(events.begin(), events.end(),
            [](const AuditEvent& a, const AuditEvent& b) { return a.sequence < b.sequence; });
  std::map<std::string, SessionStatus> state;
  for (const auto& e : events) {
    auto it = state.find(e.session_id);
    const std::optional<SessionStatus> current =
        it == state.end() ? std::nullopt : std::optional(it->second);
    if (current != e.from)
      throw StateError("audit event " + std::to_string(e.sequence) + " does not follow the replayed state of " +
                       e.session_id);
    if (e.from && !is_valid_transition(*e.from, e.to))
      throw StateError("audit event " + std::to_string(e.sequence) + " is not a valid transition");
    state[e.session_id] = e.to;
  }
  return state;
}

std::vector<Session> load_sessions(const RecordStore& store) {
  std::map<std::string, Session> sessions;
  for (const auto& rec : store.load_all(RecordKind::session)) {
    auto s = session_from_payload(rec.payload);
    sessions[s.session_id] = std::move(s);
  }
  std::map<std::string, std::map<std::size_t, ChatMessage>> messages;
  for (const auto& rec : store.load_all(RecordKind::transcript_message)) {
    auto m = message_from_payload(rec.payload);
    messages[m.session_id][m.index] = std::move(m.message);
  }
  std::vector<Session> out;
  for (auto& [id, s] : sessions) {
    auto& msgs = messages[id];
    std::size_t expected = 0;
    for (auto& [index, m] : msgs) {
      if (index != expected) break;  // gap: keep the contiguous prefix only
      s.transcript.push_back(std::move(m));
      ++expected;
    }
    while (!s.transcript.empty() && s.transcript.back().role != Role::assistant) s.transcript.pop_back();
    out.push_back(std::move(s));
  }
  return out;
}

AuditLog::AuditLog(RecordStore& store) : store_(store) {
  const auto ids = store_.ids(RecordKind::audit_event);
  if (!ids.empty()) next_ = audit_from_payload(store_.load(RecordKind::audit_event, ids.back()).payload).sequence + 1;
}

AuditEvent AuditLog::append(Timestamp at, std::string session_id, std::optional<SessionStatus> from,
                            SessionStatus to, std::string reason) {
  std::lock_guard lock(mutex_);
  AuditEvent e{next_, at, std::move(session_id), from, to, std::move(reason)};
  store_.persist({RecordKind::audit_event, audit_event_id(e.sequence), audit_payload(e)});
  ++next_;
  return e;
}

std::vector<AuditEvent> AuditLog::events() const {
  std::vector<AuditEvent> out;
  for (const auto& rec : store_.load_all(RecordKind::audit_event)) out.push_back(audit_from_payload(rec.payload));
  return out;
}

}  // namespace vpsim
