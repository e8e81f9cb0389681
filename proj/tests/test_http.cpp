#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "aipoll/embedding.hpp"
#include "aipoll/error.hpp"
#include "aipoll/gateway.hpp"

using namespace aipoll;

namespace {

/// Local server answering chat and embedding calls the way the hosted API does.
class FakeApi {
 public:
  FakeApi() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = nlohmann::json::parse(req.body);
      if (status_ != 200) {
        res.status = status_;
        res.set_content(R"({"error":{"message":"nope"}})", "application/json");
        return;
      }
      const nlohmann::json reply{
          {"choices", {{{"message", {{"role", "assistant"}, {"content", R"({"justification":"j","score":2})"}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      last_body_ = nlohmann::json::parse(req.body);
      ++embedding_calls_;
      if (embedding_calls_ == 1) {
        res.status = 503;
        return;
      }
      const nlohmann::json reply{{"data", {{{"embedding", std::vector<double>(300, 0.5)}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeApi() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  int status_ = 200;
  int embedding_calls_ = 0;
  std::string last_auth_;
  nlohmann::json last_body_;
};

}  // namespace

TEST(HttpWire, ChatCompletionRoundTrip) {
  FakeApi api;
  ::setenv("AIPOLL_TEST_KEY", "sk-test", 1);
  BackendConfig cfg;
  cfg.endpoint = api.url("/v1/chat/completions");
  cfg.api_key_env = "AIPOLL_TEST_KEY";
  cfg.model_name = "test-model";
  cfg.timeout_seconds = 5;
  HttpChatBackend backend(cfg);

  CompletionRequest req;
  req.cardinality = 5;
  req.schema = ExpectedSchema::ScoreWithJustification;
  req.prompt = "prompt text";
  EXPECT_EQ(backend.complete(req), R"({"justification":"j","score":2})");
  std::lock_guard lock(api.mutex_);
  EXPECT_EQ(api.last_auth_, "Bearer sk-test");
  EXPECT_EQ(api.last_body_.at("model"), "test-model");
  EXPECT_EQ(api.last_body_.at("messages")[0].at("content"), "prompt text");
  EXPECT_EQ(api.last_body_.at("response_format").at("type"), "json_schema");
}

TEST(HttpWire, StatusCodesMapToErrorKinds) {
  FakeApi api;
  BackendConfig cfg;
  cfg.endpoint = api.url("/v1/chat/completions");
  cfg.api_key_env = "";
  cfg.timeout_seconds = 5;
  HttpChatBackend backend(cfg);
  CompletionRequest req;
  req.cardinality = 2;
  req.schema = ExpectedSchema::DistributionOnly;
  req.prompt = "p";
  const std::pair<int, ErrorCode> cases[] = {
      {401, ErrorCode::Auth}, {403, ErrorCode::Auth}, {429, ErrorCode::Backend}, {500, ErrorCode::Backend}};
  for (const auto& [status, code] : cases) {
    {
      std::lock_guard lock(api.mutex_);
      api.status_ = status;
    }
    try {
      backend.complete(req);
      ADD_FAILURE() << status;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << status;
    }
  }
}

TEST(HttpWire, UnreachableEndpointIsRetryable) {
  BackendConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  cfg.api_key_env = "";
  cfg.timeout_seconds = 2;
  HttpChatBackend backend(cfg);
  CompletionRequest req;
  req.cardinality = 2;
  req.prompt = "p";
  try {
    backend.complete(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Backend);
  }
}

TEST(HttpWire, EmbeddingRetriesThenParses) {
  FakeApi api;
  EmbeddingConfig cfg;
  cfg.backend = "http";
  cfg.endpoint = api.url("/v1/embeddings");
  cfg.api_key_env = "";
  cfg.model_name = "embed-model";
  cfg.timeout_seconds = 5;
  int sleeps = 0;
  HttpEmbeddingBackend backend(cfg, [&](std::chrono::duration<double>) { ++sleeps; });
  const auto v = backend.embed("hello");
  EXPECT_EQ(v.size(), 300u);
  EXPECT_EQ(sleeps, 1);
  std::lock_guard lock(api.mutex_);
  EXPECT_EQ(api.last_body_.at("input"), "hello");
  EXPECT_EQ(api.last_body_.at("model"), "embed-model");
}
