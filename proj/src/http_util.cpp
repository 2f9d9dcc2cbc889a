#include "fcm/http_util.hpp"

#include <httplib.h>

#include "fcm/error.hpp"

namespace fcm {

std::string http_post_json(std::string_view base_url, std::string_view path,
                           const std::string& body, std::chrono::milliseconds timeout) {
  httplib::Client client{std::string(base_url)};
  if (!client.is_valid()) {
    throw Error(ErrorCode::EndpointError, "invalid endpoint '" + std::string(base_url) + "'");
  }
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  auto res = client.Post(std::string(path), body, "application/json");
  if (!res) {
    throw Error(ErrorCode::EndpointError, std::string(base_url) + std::string(path) + ": " +
                                              httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::EndpointError, std::string(base_url) + std::string(path) +
                                              ": HTTP " + std::to_string(res->status));
  }
  return res->body;
}

}  // namespace fcm
