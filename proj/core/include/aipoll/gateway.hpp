#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipoll/corpus.hpp"
#include "aipoll/model.hpp"
#include "aipoll/prompt.hpp"

namespace aipoll {

class QueryCache;

// ---------------------------------------------------------------------------
// Configuration and payloads
// ---------------------------------------------------------------------------

struct BackendConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-4o-mini";
  double temperature = 1.0;
  int max_concurrency = 4;
  int max_retries = 3;
  /// Name of the environment variable holding the API key. The key itself
  /// is never stored in configs, caches or manifests.
  std::string api_key_env = "OPENAI_API_KEY";
  double retry_base_seconds = 1.0;
  double retry_factor = 2.0;
  /// 0 disables rate limiting.
  double requests_per_second = 0.0;
  double timeout_seconds = 60.0;
  /// Accepted range for the sum of a DD payload before renormalization.
  double dd_sum_min = 95.0;
  double dd_sum_max = 105.0;
  int si_repeats = 20;

  void validate() const;
  nlohmann::json to_json() const;
  static BackendConfig from_json(const nlohmann::json& j);
};

struct ParsedPayload {
  std::string justification;
  /// SI: selected category, 1..C.
  std::optional<int> score;
  /// DD: raw per-category mass as returned (sums to ~100).
  std::optional<std::vector<double>> distribution;
};

/// Validates a model reply against the schema the prompt asked for.
/// Throws Error(Parse) for malformed JSON or wrong types and Error(Shape)
/// for wrong lengths, out-of-range scores or sums outside [sum_min, sum_max].
ParsedPayload parse_payload(std::string_view content, ExpectedSchema schema, int cardinality,
                            double sum_min = 95.0, double sum_max = 105.0);

/// JSON schema handed to the backend's structured-output option.
nlohmann::json response_schema(ExpectedSchema schema, int cardinality);

struct QueryRecord {
  PermutationKey key;
  int repeat_index = 0;
  std::string prompt_hash;
  std::string raw_response;
  std::optional<ParsedPayload> parsed;
  /// Why the permutation failed; empty when `parsed` is set.
  std::string failure;
  int attempts = 0;
  std::string timestamp;

  bool ok() const noexcept { return parsed.has_value(); }
};

nlohmann::json to_json(const QueryRecord& r);
QueryRecord query_record_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

/// What a backend needs to answer one query. `key` and `repeat_index` are
/// not sent over the wire; scripted backends use them to pick replies.
struct CompletionRequest {
  PermutationKey key;
  int repeat_index = 0;
  int cardinality = 0;
  ExpectedSchema schema = ExpectedSchema::ScoreWithJustification;
  std::string prompt;
};

/// Chat-completion transport. Implementations return the assistant message
/// content, throw Error(Backend) for retryable failures and Error(Auth) for
/// failures that must abort the run.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// `{model, temperature, messages, response_format}` request body.
nlohmann::json build_chat_request(const CompletionRequest& request, const BackendConfig& config);

/// choices[0].message.content of a chat-completion response.
std::string extract_message_content(const nlohmann::json& response);

class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config);
  std::string complete(const CompletionRequest& request) override;

 private:
  BackendConfig config_;
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

using Sleeper = std::function<void(std::chrono::duration<double>)>;

/// Spaces request starts at least 1/rate seconds apart across threads.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second) : rate_(requests_per_second) {}
  void acquire();

 private:
  double rate_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_{};
};

struct ExecutionContext {
  const BackendConfig* config = nullptr;
  ChatBackend* backend = nullptr;
  QueryCache* cache = nullptr;
  Sleeper sleep;
  RateLimiter* limiter = nullptr;
  /// Count of requests that actually reached the backend.
  std::atomic<std::size_t>* backend_calls = nullptr;
  /// Re-issue queries whose cached record is a failure.
  bool retry_failed = false;
};

Sleeper real_sleeper();

/// Backoff before retry `attempt` (1-based): base * factor^(attempt-1),
/// stretched by up to 25% jitter drawn deterministically from `jitter_seed`.
std::chrono::duration<double> backoff_delay(const BackendConfig& config, int attempt, std::uint64_t jitter_seed);

struct ExecuteOutcome {
  QueryRecord record;
  bool from_cache = false;
};

/// Runs one query: cache lookup, then up to max_retries + 1 attempts with
/// backoff, then an append to the cache (failures included, so reruns are
/// idempotent). Error(Auth) propagates.
ExecuteOutcome execute(const RenderedPrompt& prompt, int repeat_index, ExecutionContext& ctx);

/// Empirical distribution of SI scores over categories 1..C.
OpinionDistribution si_distribution_from_scores(std::span<const int> scores, int cardinality);

struct Collected {
  OpinionDistribution distribution;
  int n_success = 0;
  int n_failed = 0;
  std::vector<QueryRecord> records;
};

/// Issues the SI repeats for one permutation. Throws
/// Error(MissingDistribution) if no repeat succeeded.
Collected collect_si(const Question& question, const DemographicCell& cell, ExecutionContext& ctx);

/// Issues the single DD query for one permutation.
Collected collect_dd(const Question& question, const DemographicCell& cell, const PromptVariant& variant,
                     ExecutionContext& ctx);

// ---------------------------------------------------------------------------
// Batch polling
// ---------------------------------------------------------------------------

struct PollJob {
  RenderedPrompt prompt;
  int repeat_index = 0;
};

struct JobsOutcome {
  /// Same order as the input jobs, regardless of completion order.
  std::vector<QueryRecord> records;
  std::size_t cache_hits = 0;
};

/// Runs jobs on `max_concurrency` workers. The first Error(Auth) stops
/// all workers and is rethrown after they join.
JobsOutcome run_jobs(std::span<const PollJob> jobs, ExecutionContext& ctx);

/// One elicited distribution, or the reason there is none.
struct ModelDistribution {
  PermutationKey key;
  int cardinality = 0;
  std::optional<OpinionDistribution> distribution;
  int n_success = 0;
  int n_requested = 0;
  std::string failure;
};

nlohmann::json to_json(const ModelDistribution& d);
ModelDistribution model_distribution_from_json(const nlohmann::json& j);

struct PollSummary {
  std::vector<ModelDistribution> distributions;
  std::size_t jobs = 0;
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;
  std::size_t failed_queries = 0;
};

/// Builds and runs every job for the given variants over corpus x 20 cells:
/// si_repeats per SI permutation, one per DD permutation. Output order is
/// question, cell, variant.
PollSummary poll(const QuestionCorpus& corpus, std::span<const PromptVariant> variants, ExecutionContext& ctx);

}  // namespace aipoll
