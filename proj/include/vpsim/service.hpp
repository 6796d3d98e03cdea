#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vpsim/affect.hpp"
#include "vpsim/config.hpp"
#include "vpsim/conversation.hpp"
#include "vpsim/gateway.hpp"
#include "vpsim/store.hpp"
#include "vpsim/study.hpp"

namespace vpsim {

/// Everything the service needs, with providers already constructed.
struct ServiceOptions {
  ApiConfig config;
  std::string admin_token;  // empty disables admin routes
  std::shared_ptr<ChatProvider> chat;
  std::shared_ptr<AffectProvider> affect;
  Clock clock = system_clock();
  Sleeper sleeper = thread_sleeper();
  /// Receives one line per request ("POST /api/sessions 201"). Never sees
  /// headers or bodies.
  std::function<void(const std::string&)> log;
};

/// Builds providers from the config and reads the admin token from the
/// environment. Throws Error when a required secret or fixture is missing.
ServiceOptions options_from_config(const ApiConfig& config);

/// Static study material read from the storage path at startup.
struct StudyMaterial {
  std::shared_ptr<const CategoryManifest> manifest;
  std::shared_ptr<ScriptRegistry> scripts;
  std::map<std::string, Questionnaire> questionnaires;  // by locale
  std::optional<AdjectiveMap> adjective_map;
};

/// Loads category_manifest.json, scripts/*.json, questionnaires/ and
/// adjective_map.json (optional) below `root`, keeping only `locales`.
StudyMaterial load_study_material(const std::filesystem::path& root,
                                  const std::vector<std::string>& locales);

/// HTTP front end over the engine, store and analytics. Routes are listed in
/// docs/http-api.md.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds without serving; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  void listen();
  void stop();
  bool is_running() const;
  /// Blocks until the server accepts connections.
  void wait_until_ready() const;

  ConversationEngine& engine();
  const RecordStore& store() const;
  const StudyMaterial& material() const;

  /// Scores every VP message of the session and stores the result.
  SessionAffect analyze_session(const std::string& session_id);
  ExportInput export_input() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vpsim
