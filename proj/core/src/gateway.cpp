#include "aipoll/gateway.hpp"

#include <cmath>
#include <ctime>
#include <exception>
#include <set>
#include <thread>

#include "aipoll/cache.hpp"
#include "aipoll/error.hpp"
#include "aipoll/util/hash.hpp"
#include "aipoll/util/rng.hpp"

namespace aipoll {
namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json payload_to_json(const ParsedPayload& p) {
  nlohmann::json j = {{"justification", p.justification}};
  if (p.score) j["score"] = *p.score;
  if (p.distribution) j["distribution"] = *p.distribution;
  return j;
}

ParsedPayload payload_from_json(const nlohmann::json& j) {
  ParsedPayload p;
  p.justification = j.value("justification", "");
  if (j.contains("score")) p.score = j.at("score").get<int>();
  if (j.contains("distribution")) p.distribution = j.at("distribution").get<std::vector<double>>();
  return p;
}

// Folds the records of one permutation into a distribution.
ModelDistribution assemble(const PermutationKey& key, int cardinality, std::span<const QueryRecord> records) {
  ModelDistribution out;
  out.key = key;
  out.cardinality = cardinality;
  out.n_requested = static_cast<int>(records.size());
  if (key.variant.framework() == Framework::SI) {
    std::vector<int> scores;
    for (const auto& r : records) {
      if (r.ok() && r.parsed->score) scores.push_back(*r.parsed->score);
    }
    out.n_success = static_cast<int>(scores.size());
    if (scores.empty()) {
      out.failure = records.empty() ? "no repeats issued" : records.back().failure;
    } else {
      out.distribution = si_distribution_from_scores(scores, cardinality);
    }
  } else {
    const auto& r = records.front();
    if (r.ok() && r.parsed->distribution) {
      out.distribution = make_distribution(*r.parsed->distribution, cardinality);
      out.n_success = 1;
    } else {
      out.failure = r.failure;
    }
  }
  return out;
}

Collected to_collected(ModelDistribution md, std::vector<QueryRecord> records) {
  if (!md.distribution) {
    throw Error(ErrorCode::MissingDistribution, md.key.to_string() + ": " + md.failure);
  }
  return Collected{std::move(*md.distribution), md.n_success, md.n_requested - md.n_success, std::move(records)};
}

}  // namespace

// ---------------------------------------------------------------------------

void BackendConfig::validate() const {
  if (max_concurrency < 1) throw Error(ErrorCode::InvalidArgument, "max_concurrency must be >= 1");
  if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must be >= 0");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  if (!(retry_base_seconds >= 0.0) || !(retry_factor >= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "retry backoff needs base >= 0 and factor >= 1");
  }
  if (!(dd_sum_min <= dd_sum_max)) throw Error(ErrorCode::InvalidArgument, "dd sum range is empty");
  if (si_repeats < 1) throw Error(ErrorCode::InvalidArgument, "si_repeats must be >= 1");
}

nlohmann::json BackendConfig::to_json() const {
  return {{"endpoint", endpoint},
          {"model_name", model_name},
          {"temperature", temperature},
          {"max_concurrency", max_concurrency},
          {"max_retries", max_retries},
          {"api_key_env", api_key_env},
          {"retry_base_seconds", retry_base_seconds},
          {"retry_factor", retry_factor},
          {"requests_per_second", requests_per_second},
          {"timeout_seconds", timeout_seconds},
          {"dd_sum_min", dd_sum_min},
          {"dd_sum_max", dd_sum_max},
          {"si_repeats", si_repeats}};
}

BackendConfig BackendConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"endpoint",     "model_name",         "temperature",  "max_concurrency",
                                           "max_retries",  "api_key_env",        "retry_base_seconds",
                                           "retry_factor", "requests_per_second", "timeout_seconds",
                                           "dd_sum_min",   "dd_sum_max",         "si_repeats"};
  for (const auto& [k, v] : j.items()) {
    if (k == "api_key" || k == "key" || k == "token") {
      throw Error(ErrorCode::Schema, "backend." + k + ": put the key in an environment variable and name it in api_key_env");
    }
    if (!known.contains(k)) throw Error(ErrorCode::Schema, "unknown key '" + k + "' in backend");
  }
  BackendConfig c;
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model_name = j.value("model_name", c.model_name);
  c.temperature = j.value("temperature", c.temperature);
  c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.retry_base_seconds = j.value("retry_base_seconds", c.retry_base_seconds);
  c.retry_factor = j.value("retry_factor", c.retry_factor);
  c.requests_per_second = j.value("requests_per_second", c.requests_per_second);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.dd_sum_min = j.value("dd_sum_min", c.dd_sum_min);
  c.dd_sum_max = j.value("dd_sum_max", c.dd_sum_max);
  c.si_repeats = j.value("si_repeats", c.si_repeats);
  c.validate();
  return c;
}

ParsedPayload parse_payload(std::string_view content, ExpectedSchema schema, int cardinality, double sum_min,
                            double sum_max) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(content);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("reply is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::Parse, "reply is not a JSON object");
  if (!j.contains("justification") || !j.at("justification").is_string()) {
    throw Error(ErrorCode::Parse, "reply lacks a string \"justification\"");
  }
  ParsedPayload p;
  p.justification = j.at("justification").get<std::string>();

  if (schema == ExpectedSchema::ScoreWithJustification) {
    if (!j.contains("score") || !j.at("score").is_number()) {
      throw Error(ErrorCode::Parse, "reply lacks a numeric \"score\"");
    }
    const double raw = j.at("score").get<double>();
    if (!std::isfinite(raw) || raw != std::floor(raw)) throw Error(ErrorCode::Parse, "score is not an integer");
    if (raw < 1 || raw > cardinality) {
      throw Error(ErrorCode::Shape, "score " + std::to_string(raw) + " outside 1.." + std::to_string(cardinality));
    }
    p.score = static_cast<int>(raw);
    return p;
  }

  if (!j.contains("distribution") || !j.at("distribution").is_array()) {
    throw Error(ErrorCode::Parse, "reply lacks a \"distribution\" list");
  }
  const auto& arr = j.at("distribution");
  if (arr.size() != static_cast<std::size_t>(cardinality)) {
    throw Error(ErrorCode::Shape, "distribution has " + std::to_string(arr.size()) + " entries, expected " +
                                      std::to_string(cardinality));
  }
  std::vector<double> values;
  double total = 0.0;
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error(ErrorCode::Parse, "distribution entry is not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw Error(ErrorCode::Shape, "distribution entry is not finite");
    if (x < 0.0) throw Error(ErrorCode::NegativeMass, "distribution entry is negative");
    values.push_back(x);
    total += x;
  }
  if (total < sum_min || total > sum_max) {
    throw Error(ErrorCode::Shape, "distribution sums to " + std::to_string(total));
  }
  p.distribution = std::move(values);
  return p;
}

nlohmann::json response_schema(ExpectedSchema schema, int cardinality) {
  nlohmann::json props = {{"justification", {{"type", "string"}}}};
  if (schema == ExpectedSchema::ScoreWithJustification) {
    props["score"] = {{"type", "integer"},
                      {"description", "Selected position, 1 to " + std::to_string(cardinality)}};
    return {{"type", "object"},
            {"properties", props},
            {"required", {"justification", "score"}},
            {"additionalProperties", false}};
  }
  props["distribution"] = {{"type", "array"},
                           {"items", {{"type", "number"}}},
                           {"description", "Exactly " + std::to_string(cardinality) + " percentages summing to 100"}};
  return {{"type", "object"},
          {"properties", props},
          {"required", {"justification", "distribution"}},
          {"additionalProperties", false}};
}

nlohmann::json to_json(const QueryRecord& r) {
  return {{"key", r.key.to_string()},
          {"repeat_index", r.repeat_index},
          {"prompt_hash", r.prompt_hash},
          {"raw_response", r.raw_response},
          {"parsed", r.parsed ? payload_to_json(*r.parsed) : nlohmann::json(nullptr)},
          {"failure", r.failure},
          {"attempts", r.attempts},
          {"timestamp", r.timestamp}};
}

QueryRecord query_record_from_json(const nlohmann::json& j) {
  try {
    QueryRecord r;
    r.key = PermutationKey::parse(j.at("key").get<std::string>());
    r.repeat_index = j.at("repeat_index").get<int>();
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.raw_response = j.value("raw_response", "");
    if (j.contains("parsed") && !j.at("parsed").is_null()) r.parsed = payload_from_json(j.at("parsed"));
    r.failure = j.value("failure", "");
    r.attempts = j.value("attempts", 0);
    r.timestamp = j.value("timestamp", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("query record: ") + e.what());
  }
}

nlohmann::json build_chat_request(const CompletionRequest& request, const BackendConfig& config) {
  const bool si = request.schema == ExpectedSchema::ScoreWithJustification;
  return {{"model", config.model_name},
          {"temperature", config.temperature},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
          {"response_format",
           {{"type", "json_schema"},
            {"json_schema",
             {{"name", si ? "score_response" : "distribution_response"},
              {"strict", true},
              {"schema", response_schema(request.schema, request.cardinality)}}}}}};
}

std::string extract_message_content(const nlohmann::json& response) {
  try {
    const auto& content = response.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw Error(ErrorCode::Parse, "message content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("unexpected chat-completion response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

void RateLimiter::acquire() {
  if (!(rate_ > 0.0)) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / rate_));
  std::lock_guard lock(mutex_);
  const auto now = std::chrono::steady_clock::now();
  if (next_ > now) std::this_thread::sleep_until(next_);
  next_ = std::max(now, next_) + interval;
}

Sleeper real_sleeper() {
  return [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

std::chrono::duration<double> backoff_delay(const BackendConfig& config, int attempt, std::uint64_t jitter_seed) {
  Rng rng(mix64(jitter_seed + static_cast<std::uint64_t>(attempt)));
  const double base = config.retry_base_seconds * std::pow(config.retry_factor, attempt - 1);
  return std::chrono::duration<double>(base * (1.0 + 0.25 * rng.uniform()));
}

ExecuteOutcome execute(const RenderedPrompt& prompt, int repeat_index, ExecutionContext& ctx) {
  const BackendConfig& config = *ctx.config;
  const std::string prompt_hash = sha256_hex(prompt.text);
  if (ctx.cache) {
    auto hit = ctx.cache->find(prompt.key, repeat_index, prompt_hash);
    if (hit && (hit->ok() || !ctx.retry_failed)) return {std::move(*hit), true};
  }

  QueryRecord record;
  record.key = prompt.key;
  record.repeat_index = repeat_index;
  record.prompt_hash = prompt_hash;

  const CompletionRequest request{prompt.key, repeat_index, prompt.cardinality, prompt.expected_schema,
                                  prompt.text};
  const std::string key_text = prompt.key.to_string();
  const std::uint64_t jitter_seed = derive_seed(0, key_text + "#" + std::to_string(repeat_index));
  const int max_attempts = config.max_retries + 1;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1 && ctx.sleep) ctx.sleep(backoff_delay(config, attempt - 1, jitter_seed));
    if (ctx.limiter) ctx.limiter->acquire();
    if (ctx.backend_calls) ctx.backend_calls->fetch_add(1);
    record.attempts = attempt;
    try {
      record.raw_response = ctx.backend->complete(request);
      record.parsed = parse_payload(record.raw_response, prompt.expected_schema, prompt.cardinality,
                                    config.dd_sum_min, config.dd_sum_max);
      record.failure.clear();
      break;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Auth) throw;
      record.failure = e.what();
    }
  }
  record.timestamp = utc_timestamp();
  if (ctx.cache) ctx.cache->append(record);
  return {std::move(record), false};
}

OpinionDistribution si_distribution_from_scores(std::span<const int> scores, int cardinality) {
  std::vector<double> counts(static_cast<std::size_t>(cardinality), 0.0);
  for (int s : scores) {
    if (s < 1 || s > cardinality) throw Error(ErrorCode::Shape, "score outside scale: " + std::to_string(s));
    counts[static_cast<std::size_t>(s - 1)] += 1.0;
  }
  return make_distribution(counts, cardinality);
}

Collected collect_si(const Question& question, const DemographicCell& cell, ExecutionContext& ctx) {
  const auto prompt = render(question, cell, PromptVariant::single_individual());
  std::vector<QueryRecord> records;
  for (int r = 0; r < ctx.config->si_repeats; ++r) records.push_back(execute(prompt, r, ctx).record);
  auto md = assemble(prompt.key, question.cardinality(), records);
  return to_collected(std::move(md), std::move(records));
}

Collected collect_dd(const Question& question, const DemographicCell& cell, const PromptVariant& variant,
                     ExecutionContext& ctx) {
  if (variant.framework() != Framework::DD) throw Error(ErrorCode::InvalidArgument, "collect_dd needs a DD variant");
  const auto prompt = render(question, cell, variant);
  std::vector<QueryRecord> records{execute(prompt, 0, ctx).record};
  auto md = assemble(prompt.key, question.cardinality(), records);
  return to_collected(std::move(md), std::move(records));
}

JobsOutcome run_jobs(std::span<const PollJob> jobs, ExecutionContext& ctx) {
  JobsOutcome out;
  out.records.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> hits{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  const auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        auto outcome = execute(jobs[i].prompt, jobs[i].repeat_index, ctx);
        if (outcome.from_cache) hits.fetch_add(1);
        out.records[i] = std::move(outcome.record);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop.store(true);
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, ctx.config->max_concurrency)), jobs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  out.cache_hits = hits.load();
  return out;
}

nlohmann::json to_json(const ModelDistribution& d) {
  nlohmann::json probs = nullptr;
  if (d.distribution) probs = std::vector<double>(d.distribution->probs().begin(), d.distribution->probs().end());
  return {{"key", d.key.to_string()}, {"cardinality", d.cardinality}, {"probs", probs},
          {"n_success", d.n_success}, {"n_requested", d.n_requested}, {"failure", d.failure}};
}

ModelDistribution model_distribution_from_json(const nlohmann::json& j) {
  try {
    ModelDistribution d;
    d.key = PermutationKey::parse(j.at("key").get<std::string>());
    d.cardinality = j.at("cardinality").get<int>();
    if (!j.at("probs").is_null()) {
      const auto probs = j.at("probs").get<std::vector<double>>();
      d.distribution = make_distribution(probs, d.cardinality);
    }
    d.n_success = j.value("n_success", 0);
    d.n_requested = j.value("n_requested", 0);
    d.failure = j.value("failure", "");
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("model distribution record: ") + e.what());
  }
}

PollSummary poll(const QuestionCorpus& corpus, std::span<const PromptVariant> variants, ExecutionContext& ctx) {
  ctx.config->validate();
  struct Span {
    PermutationKey key;
    int cardinality;
    std::size_t begin;
    std::size_t end;
  };
  std::vector<PollJob> jobs;
  std::vector<Span> spans;
  for (const auto& q : corpus.questions()) {
    for (const auto& cell : all_cells()) {
      for (const auto& v : variants) {
        auto prompt = render(q, cell, v);
        const int repeats = v.framework() == Framework::SI ? ctx.config->si_repeats : 1;
        spans.push_back({prompt.key, q.cardinality(), jobs.size(), jobs.size() + static_cast<std::size_t>(repeats)});
        for (int r = 0; r < repeats; ++r) jobs.push_back({prompt, r});
      }
    }
  }

  std::atomic<std::size_t> calls{0};
  auto* const outer_calls = ctx.backend_calls;
  ctx.backend_calls = &calls;
  JobsOutcome outcome;
  try {
    outcome = run_jobs(jobs, ctx);
  } catch (...) {
    ctx.backend_calls = outer_calls;
    if (outer_calls) outer_calls->fetch_add(calls.load());
    throw;
  }
  ctx.backend_calls = outer_calls;
  if (outer_calls) outer_calls->fetch_add(calls.load());

  PollSummary summary;
  summary.jobs = jobs.size();
  summary.cache_hits = outcome.cache_hits;
  summary.backend_calls = calls.load();
  for (const auto& r : outcome.records) {
    if (!r.ok()) ++summary.failed_queries;
  }
  for (const auto& s : spans) {
    summary.distributions.push_back(
        assemble(s.key, s.cardinality,
                 std::span<const QueryRecord>(outcome.records).subspan(s.begin, s.end - s.begin)));
  }
  return summary;
}

}  // namespace aipoll
