#include <cstdlib>

#include "aipoll/detail/http.hpp"
#include "aipoll/error.hpp"
#include "aipoll/gateway.hpp"

namespace aipoll {

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
}

std::string HttpChatBackend::complete(const CompletionRequest& request) {
  detail::HttpHeaders headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  const auto body = build_chat_request(request, config_).dump();
  const auto res = detail::http_post_json(config_.endpoint, body, headers, config_.timeout_seconds);

  if (res.status == 0) throw Error(ErrorCode::Backend, "transport failure: " + res.error);
  // 408 and 429 are transient; every other 4xx means credentials or request
  // shape are wrong and retrying cannot help.
  if (res.status >= 400 && res.status < 500 && res.status != 408 && res.status != 429) {
    throw Error(ErrorCode::Auth, "HTTP " + std::to_string(res.status) + " from " + config_.endpoint + ": " +
                                     res.body.substr(0, 200));
  }
  if (res.status != 200) throw Error(ErrorCode::Backend, "HTTP " + std::to_string(res.status));

  nlohmann::json body_json;
  try {
    body_json = nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("response body is not JSON: ") + e.what());
  }
  return extract_message_content(body_json);
}

}  // namespace aipoll
