#include "vpsim/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vpsim/illness_script.hpp"

namespace vpsim {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

void read_ms(const json& obj, const char* key, std::chrono::milliseconds& out) {
  if (obj.contains(key) && !obj.at(key).is_null())
    out = std::chrono::milliseconds(obj.at(key).get<std::int64_t>());
}

}  // namespace

std::string ApiConfig::host() const {
  const auto colon = bind_address.rfind(':');
  return colon == std::string::npos ? bind_address : bind_address.substr(0, colon);
}

int ApiConfig::port() const {
  const auto colon = bind_address.rfind(':');
  if (colon == std::string::npos) return -1;
  try {
    std::size_t used = 0;
    const int p = std::stoi(bind_address.substr(colon + 1), &used);
    return used == bind_address.size() - colon - 1 ? p : -1;
  } catch (const std::exception&) {
    return -1;
  }
}

void ApiConfig::check() const {
  std::vector<std::string> v;
  if (host().empty() || port() < 0 || port() > 65535)
    v.push_back("bind_address must be host:port");
  if (storage_path.empty()) v.push_back("storage_path is empty");
  if (locales.empty()) v.push_back("at least one locale must be configured");
  for (const auto& l : locales)
    if (!is_supported_locale(l)) v.push_back("unsupported locale '" + l + "'");
  if (admin_token_ref.empty()) v.push_back("admin_token_ref is empty");
  if (provider_kind == ChatProviderKind::scripted && scripted_fixture.empty())
    v.push_back("provider.fixture is required for the scripted provider");
  if (affect_provider.kind == AffectProviderKind::lexicon && affect_provider.lexicon_path.empty())
    v.push_back("affect_provider.lexicon is required for the lexicon provider");
  if (affect_provider.kind == AffectProviderKind::http && affect_provider.endpoint_url.empty())
    v.push_back("affect_provider.endpoint_url is required for the http provider");
  try {
    provider.check();
  } catch (const ValidationError& e) {
    for (const auto& x : e.violations()) v.push_back("provider: " + x);
  }
  if (!v.empty()) throw ValidationError("invalid config", v);
}

ApiConfig load_api_config(std::string_view document, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config: expected an object");

  ApiConfig c;
  try {
    read(doc, "bind_address", c.bind_address);
    std::string storage = "data";
    read(doc, "storage_path", storage);
    c.storage_path = resolve(base_dir, storage);
    read(doc, "locales", c.locales);
    read(doc, "admin_token_ref", c.admin_token_ref);
    if (doc.contains("seed") && !doc.at("seed").is_null()) c.seed = doc.at("seed").get<std::uint64_t>();
    read(doc, "deterministic_ids", c.deterministic_ids);

    if (doc.contains("provider")) {
      const auto& p = doc.at("provider");
      std::string kind = "openai_compatible";
      read(p, "kind", kind);
      if (kind == "scripted") c.provider_kind = ChatProviderKind::scripted;
      else if (kind != "openai_compatible") throw ParseError("config: unknown provider kind '" + kind + "'");
      std::string fixture;
      read(p, "fixture", fixture);
      c.scripted_fixture = resolve(base_dir, fixture);
      read(p, "endpoint_url", c.provider.endpoint_url);
      read(p, "model_id", c.provider.model_id);
      read(p, "temperature", c.provider.temperature);
      read(p, "max_output_tokens", c.provider.max_output_tokens);
      read(p, "credential_ref", c.provider.credential_ref);
      read_ms(p, "request_timeout_ms", c.provider.request_timeout);
      if (p.contains("retry")) {
        read(p.at("retry"), "max_attempts", c.provider.retry.max_attempts);
        read_ms(p.at("retry"), "base_backoff_ms", c.provider.retry.base_backoff);
      }
    }
    if (doc.contains("affect_provider")) {
      const auto& a = doc.at("affect_provider");
      std::string kind = "lexicon";
      read(a, "kind", kind);
      if (kind == "http") c.affect_provider.kind = AffectProviderKind::http;
      else if (kind != "lexicon") throw ParseError("config: unknown affect provider kind '" + kind + "'");
      std::string lexicon;
      read(a, "lexicon", lexicon);
      c.affect_provider.lexicon_path = resolve(base_dir, lexicon);
      read(a, "endpoint_url", c.affect_provider.endpoint_url);
      read(a, "credential_ref", c.affect_provider.credential_ref);
      read_ms(a, "timeout_ms", c.affect_provider.timeout);
      read(a, "renormalize_word_vectors", c.affect_provider.renormalize_word_vectors);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  c.check();
  return c;
}

ApiConfig load_api_config_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_api_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::optional<std::string> resolve_secret(std::string_view ref) {
  if (ref.empty()) return std::nullopt;
  const char* v = std::getenv(std::string(ref).c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

}  // namespace vpsim
