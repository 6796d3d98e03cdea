#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "vpsim/service.hpp"

namespace vpsim::test {

inline const std::string kAdminToken = "admin-secret-7f3a";

struct Reply {
  int status = 0;
  nlohmann::json body;
};

/// A service on an ephemeral port over a private copy of the study data.
class LiveService {
 public:
  explicit LiveService(const fs::path& storage, std::shared_ptr<ChatProvider> chat = nullptr,
                       ManualClock clock = ManualClock{}, std::string admin_token = kAdminToken)
      : clock_(clock) {
    ServiceOptions o;
    o.config.storage_path = storage;
    o.config.locales = {"en", "de"};
    o.config.seed = 7;
    o.config.deterministic_ids = true;
    o.config.provider.retry = {2, std::chrono::milliseconds(1)};
    o.admin_token = std::move(admin_token);
    o.chat = chat ? std::move(chat)
                  : load_scripted_provider(read_text(data_path("fixtures/accuser_replay.en.json")));
    o.affect = std::make_shared<LexiconMockProvider>(
        load_lexicon_mock(read_text(data_path("fixtures/lexicon.en.json"))));
    o.clock = clock_.clock();
    o.sleeper = [](std::chrono::milliseconds) {};
    o.log = [this](const std::string& line) {
      std::lock_guard lock(log_mutex_);
      log_.push_back(line);
    };
    service_ = std::make_unique<Service>(std::move(o));
    port_ = service_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { service_->listen(); });
    service_->wait_until_ready();
  }

  ~LiveService() {
    service_->stop();
    thread_.join();
  }

  Service& service() { return *service_; }
  ManualClock& clock() { return clock_; }
  std::vector<std::string> log() {
    std::lock_guard lock(log_mutex_);
    return log_;
  }

  Reply call(const std::string& method, const std::string& path, const nlohmann::json* body = nullptr,
             const httplib::Headers& headers = {}) {
    httplib::Client client("127.0.0.1", port_);
    client.set_read_timeout(10, 0);
    httplib::Result res = method == "GET" ? client.Get(path, headers)
                                          : client.Post(path, headers, body ? body->dump() : "{}",
                                                        "application/json");
    if (!res) throw std::runtime_error("request failed: " + httplib::to_string(res.error()));
    Reply r;
    r.status = res->status;
    r.body = res->body.empty() ? nlohmann::json() : nlohmann::json::parse(res->body);
    raw_bodies.push_back(res->body);
    return r;
  }

  Reply get(const std::string& path, const httplib::Headers& h = {}) { return call("GET", path, nullptr, h); }
  Reply post(const std::string& path, const nlohmann::json& body, const httplib::Headers& h = {}) {
    return call("POST", path, &body, h);
  }

  static httplib::Headers participant(const std::string& token) { return {{"X-Participant-Token", token}}; }
  static httplib::Headers admin(const std::string& token = kAdminToken) {
    return {{"Authorization", "Bearer " + token}};
  }

  std::vector<std::string> raw_bodies;

 private:
  ManualClock clock_;
  std::unique_ptr<Service> service_;
  int port_ = 0;
  std::thread thread_;
  std::mutex log_mutex_;
  std::vector<std::string> log_;
};

}  // namespace vpsim::test
