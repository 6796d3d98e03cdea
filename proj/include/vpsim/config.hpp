#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpsim/gateway.hpp"

namespace vpsim {

enum class ChatProviderKind { openai_compatible, scripted };
enum class AffectProviderKind { lexicon, http };

struct AffectProviderConfig {
  AffectProviderKind kind = AffectProviderKind::lexicon;
  std::filesystem::path lexicon_path;  // lexicon
  std::string endpoint_url;            // http
  std::string credential_ref;          // http, env var name
  std::chrono::milliseconds timeout{30000};
  bool renormalize_word_vectors = false;
};

struct ApiConfig {
  std::string bind_address = "127.0.0.1:8080";
  std::filesystem::path storage_path = "data";
  ChatProviderKind provider_kind = ChatProviderKind::openai_compatible;
  std::filesystem::path scripted_fixture;  // scripted provider replies
  ProviderConfig provider;
  AffectProviderConfig affect_provider;
  std::vector<std::string> locales{"en", "de"};
  /// Name of the environment variable holding the admin bearer token.
  std::string admin_token_ref = "VPSIM_ADMIN_TOKEN";
  std::optional<std::uint64_t> seed;  // fixed seed: reproducible assignment and ids
  bool deterministic_ids = false;

  std::string host() const;
  int port() const;
  /// Throws ValidationError listing every problem.
  void check() const;
};

/// Relative paths in the document are resolved against `base_dir`.
ApiConfig load_api_config(std::string_view document, const std::filesystem::path& base_dir = ".");
ApiConfig load_api_config_file(const std::filesystem::path& path);

/// Value of the environment variable `ref`; nullopt when unset or empty.
std::optional<std::string> resolve_secret(std::string_view ref);

}  // namespace vpsim
