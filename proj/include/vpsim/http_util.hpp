#pragma once

#include <string>
#include <string_view>

namespace vpsim {

/// "https://host:8443/v1/chat" -> {"https://host:8443", "/v1/chat"}.
struct UrlParts {
  std::string origin;
  std::string path;
};

/// Throws vpsim::Error when the URL lacks a scheme or host.
UrlParts split_url(std::string_view url);

}  // namespace vpsim
