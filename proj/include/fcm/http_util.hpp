#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace fcm {

// POSTs a JSON body to base_url + path and returns the response body.
// Throws EndpointError on connection failure or a non-2xx status.
std::string http_post_json(std::string_view base_url, std::string_view path,
                           const std::string& body, std::chrono::milliseconds timeout);

}  // namespace fcm
