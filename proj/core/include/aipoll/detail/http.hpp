#pragma once

#include <string>
#include <utility>
#include <vector>

namespace aipoll::detail {

struct HttpResponse {
  /// 0 when the request never produced an HTTP status (DNS, TLS, timeout).
  int status = 0;
  std::string body;
  std::string error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// POSTs a JSON body to an http:// or https:// URL.
HttpResponse http_post_json(const std::string& url, const std::string& body, const HttpHeaders& headers,
                            double timeout_seconds);

}  // namespace aipoll::detail
