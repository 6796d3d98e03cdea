#include <cstdlib>

#include <httplib.h>

#include "vpsim/gateway.hpp"
#include "vpsim/http_util.hpp"

namespace vpsim {

UrlParts split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0)
    throw Error("URL without scheme: " + std::string(url));
  const auto path_start = url.find('/', scheme_end + 3);
  UrlParts parts;
  parts.origin = std::string(url.substr(0, path_start));
  parts.path = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));
  if (parts.origin.size() <= scheme_end + 3) throw Error("URL without host: " + std::string(url));
  return parts;
}

std::string OpenAiCompatibleProvider::send(const PromptPlan& plan, const ProviderConfig& config) {
  UrlParts url;
  try {
    url = split_url(config.endpoint_url);
  } catch (const Error& e) {
    throw GatewayError(GatewayErrorKind::provider_rejected, e.what());
  }

  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.request_timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
      config.request_timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (const char* key = std::getenv(config.credential_ref.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  auto res = client.Post(url.path, headers, build_request_body(plan, config), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw GatewayError(GatewayErrorKind::timeout, httplib::to_string(err));
    throw GatewayError(GatewayErrorKind::network, httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) throw classify_http_error(res->status, res->body);
  return parse_completion_response(res->body);
}

}  // namespace vpsim
