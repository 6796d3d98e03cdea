#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpsim/conversation.hpp"
#include "vpsim/study.hpp"

namespace vpsim {

enum class RecordKind { session, transcript_message, questionnaire_response, affect_result, audit_event };

std::string_view to_string(RecordKind k) noexcept;
std::optional<RecordKind> parse_record_kind(std::string_view text) noexcept;

inline constexpr int kRecordSchema = 1;

struct StoredRecord {
  RecordKind kind = RecordKind::session;
  std::string id;
  std::string payload;  // JSON document
  int schema = kRecordSchema;
};

/// One JSON file per record under <root>/records/<kind>/<id>.json. Writes go
/// to a temporary file that is fsynced and renamed over the target, so a
/// record is either absent or complete. Leftover temporaries from an
/// interrupted write are removed when the store is opened.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path root);

  /// Returns once the record is durable. Throws Error on I/O failure and
  /// ValidationError on a bad id or a payload that is not JSON.
  void persist(const StoredRecord& record);
  /// Throws NotFoundError for unknown ids.
  StoredRecord load(RecordKind kind, std::string_view id) const;
  bool contains(RecordKind kind, std::string_view id) const;
  /// Sorted ids of every stored record of `kind`.
  std::vector<std::string> ids(RecordKind kind) const;
  std::vector<StoredRecord> load_all(RecordKind kind) const;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path path_for(RecordKind kind, std::string_view id) const;

  std::filesystem::path root_;
};

/// Ids are 1-128 characters of [A-Za-z0-9._-], not starting with '.'.
bool is_valid_record_id(std::string_view id) noexcept;

// ---------------------------------------------------------------------------
// Payload codecs. Session payloads omit the transcript, which is stored as
// one transcript_message record per message.

std::string session_payload(const Session& s);
Session session_from_payload(std::string_view payload);

std::string transcript_message_id(std::string_view session_id, std::size_t index);
std::string message_payload(std::string_view session_id, std::size_t index, const ChatMessage& m);
struct StoredMessage {
  std::string session_id;
  std::size_t index = 0;
  ChatMessage message;
};
StoredMessage message_from_payload(std::string_view payload);

std::string response_payload(const QuestionnaireResponse& r);
QuestionnaireResponse response_from_payload(std::string_view payload);

std::string affect_payload(const SessionAffect& a);
SessionAffect affect_from_payload(std::string_view payload);

struct AuditEvent {
  std::uint64_t sequence = 0;
  Timestamp at{};
  std::string session_id;
  std::optional<SessionStatus> from;
  SessionStatus to = SessionStatus::consented;
  std::string reason;
  bool operator==(const AuditEvent&) const = default;
};

std::string audit_event_id(std::uint64_t sequence);
std::string audit_payload(const AuditEvent& e);
AuditEvent audit_from_payload(std::string_view payload);

/// Final status per session from events applied in sequence order. Throws
/// StateError if an event's `from` does not match the replayed state.
std::map<std::string, SessionStatus> replay_audit(std::vector<AuditEvent> events);

/// Rebuilds sessions (with transcripts) from stored records. A trailing
/// participant message without its reply, left by an interrupted turn, is
/// dropped.
std::vector<Session> load_sessions(const RecordStore& store);

/// Appends audit events with increasing sequence numbers.
class AuditLog {
 public:
  explicit AuditLog(RecordStore& store);
  AuditEvent append(Timestamp at, std::string session_id, std::optional<SessionStatus> from,
                    SessionStatus to, std::string reason);
  std::vector<AuditEvent> events() const;

 private:
  RecordStore& store_;
  std::mutex mutex_;
  std::uint64_t next_ = 1;
};

}  // namespace vpsim
