#include <cstdlib>

#include <httplib.h>

#include "vpsim/affect.hpp"
#include "vpsim/gateway.hpp"
#include "vpsim/http_util.hpp"

namespace vpsim {

HttpAffectProvider::HttpAffectProvider(std::string endpoint_url, std::string credential_ref,
                                       std::chrono::milliseconds timeout)
    : endpoint_url_(std::move(endpoint_url)),
      credential_ref_(std::move(credential_ref)),
      timeout_(timeout) {
  split_url(endpoint_url_);
}

RawAffectResult HttpAffectProvider::analyze(std::string_view text, std::string_view locale) {
  const auto url = split_url(endpoint_url_);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (const char* key = std::getenv(credential_ref_.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  auto res = client.Post(url.path, headers, build_affect_request(text, locale), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw GatewayError(GatewayErrorKind::timeout, httplib::to_string(err));
    throw GatewayError(GatewayErrorKind::network, httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) throw classify_http_error(res->status, res->body);
  return parse_affect_response(res->body);
}

}  // namespace vpsim
