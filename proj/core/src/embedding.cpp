#include "aipoll/embedding.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "aipoll/detail/http.hpp"
#include "aipoll/error.hpp"
#include "aipoll/util/hash.hpp"
#include "aipoll/util/rng.hpp"

namespace aipoll {

std::vector<double> truncate_renormalize(std::span<const double> raw, std::size_t dims) {
  if (raw.size() < dims) {
    throw Error(ErrorCode::Shape,
                "embedding has " + std::to_string(raw.size()) + " dims, need at least " + std::to_string(dims));
  }
  std::vector<double> out(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(dims));
  double norm = 0.0;
  for (double v : out) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::InvalidArgument, "embedding prefix has zero or non-finite norm");
  }
  for (double& v : out) v /= norm;
  return out;
}

nlohmann::json EmbeddingConfig::to_json() const {
  return {{"backend", backend},
          {"endpoint", endpoint},
          {"model_name", model_name},
          {"api_key_env", api_key_env},
          {"fixture_path", fixture_path},
          {"max_retries", max_retries},
          {"retry_base_seconds", retry_base_seconds},
          {"timeout_seconds", timeout_seconds},
          {"hash_dims", hash_dims}};
}

EmbeddingConfig EmbeddingConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"backend",     "endpoint",           "model_name",      "api_key_env",
                                           "fixture_path", "max_retries",       "retry_base_seconds",
                                           "timeout_seconds", "hash_dims"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw Error(ErrorCode::Schema, "unknown key '" + k + "' in embedding");
  }
  EmbeddingConfig c;
  try {
    c.backend = j.value("backend", c.backend);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model_name = j.value("model_name", c.model_name);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.fixture_path = j.value("fixture_path", c.fixture_path);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.retry_base_seconds = j.value("retry_base_seconds", c.retry_base_seconds);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.hash_dims = j.value("hash_dims", c.hash_dims);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("embedding config: ") + e.what());
  }
  if (c.backend != "http" && c.backend != "fixture" && c.backend != "hash") {
    throw Error(ErrorCode::InvalidArgument, "unknown embedding backend '" + c.backend + "'");
  }
  if (c.hash_dims < static_cast<int>(kEmbeddingDims)) {
    throw Error(ErrorCode::InvalidArgument, "hash_dims must be at least " + std::to_string(kEmbeddingDims));
  }
  if (c.max_retries < 0) throw Error(ErrorCode::InvalidArgument, "embedding max_retries must be >= 0");
  return c;
}

std::vector<double> HashEmbeddingBackend::embed(const std::string& text) {
  Rng rng(derive_seed(0, sha256_hex(text)));
  std::vector<double> v(dims_);
  for (double& x : v) x = rng.normal();
  return v;
}

FixtureEmbeddingBackend::FixtureEmbeddingBackend(const std::filesystem::path& path) : tag_("fixture") {
  try {
    const auto doc = nlohmann::json::parse(read_text_file(path));
    for (const auto& [text, vec] : doc.items()) vectors_[text] = vec.get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

FixtureEmbeddingBackend::FixtureEmbeddingBackend(std::map<std::string, std::vector<double>> vectors, std::string tag)
    : vectors_(std::move(vectors)), tag_(std::move(tag)) {}

std::vector<double> FixtureEmbeddingBackend::embed(const std::string& text) {
  const auto it = vectors_.find(text);
  if (it == vectors_.end()) throw Error(ErrorCode::MissingEmbedding, "no fixture vector for text: " + text);
  return it->second;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(EmbeddingConfig config, Sleeper sleep)
    : config_(std::move(config)), sleep_(std::move(sleep)) {
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
}

std::vector<double> HttpEmbeddingBackend::embed(const std::string& text) {
  detail::HttpHeaders headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  const auto body = nlohmann::json{{"model", config_.model_name}, {"input", text}}.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0 && sleep_) {
      sleep_(std::chrono::duration<double>(config_.retry_base_seconds * std::pow(2.0, attempt - 1)));
    }
    const auto res = detail::http_post_json(config_.endpoint, body, headers, config_.timeout_seconds);
    if (res.status >= 400 && res.status < 500 && res.status != 408 && res.status != 429) {
      throw Error(ErrorCode::Auth, "embedding endpoint returned HTTP " + std::to_string(res.status));
    }
    if (res.status != 200) {
      last_error = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
      continue;
    }
    try {
      return nlohmann::json::parse(res.body).at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed embedding response: ") + e.what();
    }
  }
  throw Error(ErrorCode::Backend, last_error);
}

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const EmbeddingConfig& config,
                                                         const std::filesystem::path& base_dir) {
  if (config.backend == "hash") return std::make_unique<HashEmbeddingBackend>(static_cast<std::size_t>(config.hash_dims));
  if (config.backend == "fixture") {
    if (config.fixture_path.empty()) throw Error(ErrorCode::InvalidArgument, "fixture embedding backend needs fixture_path");
    std::filesystem::path p = config.fixture_path;
    if (p.is_relative()) p = base_dir / p;
    return std::make_unique<FixtureEmbeddingBackend>(p);
  }
  return std::make_unique<HttpEmbeddingBackend>(config, real_sleeper());
}

namespace {

std::string cache_key(const std::string& text, const std::string& model_tag) {
  return sha256_hex(text) + "#" + model_tag;
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  for_each_jsonl(path_, [&](const nlohmann::json& j) {
    vectors_[j.at("text_sha256").get<std::string>() + "#" + j.at("model").get<std::string>()] =
        j.at("vector").get<std::vector<double>>();
  });
}

std::optional<std::vector<double>> EmbeddingCache::find(const std::string& text, const std::string& model_tag) const {
  std::lock_guard lock(mutex_);
  const auto it = vectors_.find(cache_key(text, model_tag));
  if (it == vectors_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const std::string& text, const std::string& model_tag, const std::vector<double>& vector) {
  std::lock_guard lock(mutex_);
  if (!vectors_.emplace(cache_key(text, model_tag), vector).second) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot append to " + path_.string());
  out << nlohmann::json{{"text_sha256", sha256_hex(text)}, {"model", model_tag}, {"vector", vector}}.dump() << '\n';
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mutex_);
  return vectors_.size();
}

std::vector<EmbeddingRecord> embed_questions(const QuestionCorpus& corpus, EmbeddingBackend& backend,
                                             EmbeddingCache* cache) {
  const auto tag = backend.model_tag();
  std::map<std::string, std::vector<double>> fetched;
  std::vector<EmbeddingRecord> out;
  std::vector<std::string> missing;
  for (const auto& q : corpus.questions()) {
    std::optional<std::vector<double>> raw;
    if (const auto it = fetched.find(q.text()); it != fetched.end()) raw = it->second;
    if (!raw && cache) raw = cache->find(q.text(), tag);
    if (!raw) {
      try {
        raw = backend.embed(q.text());
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Auth) throw;
        missing.push_back(q.id() + " (" + e.what() + ")");
        continue;
      }
      if (cache) cache->put(q.text(), tag, *raw);
    }
    fetched[q.text()] = *raw;
    out.push_back({q.id(), truncate_renormalize(*raw)});
  }
  if (!missing.empty()) {
    std::string msg = "no embedding for " + std::to_string(missing.size()) + " question(s):";
    for (const auto& m : missing) msg += "\n  " + m;
    throw Error(ErrorCode::MissingEmbedding, msg);
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingRecord> records,
                      const Provenance& provenance) {
  std::ostringstream out;
  out << provenance.jsonl_header() << '\n';
  for (const auto& r : records) out << nlohmann::json{{"question_id", r.question_id}, {"vector", r.vector}}.dump() << '\n';
  write_text_file(path, out.str());
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  std::vector<EmbeddingRecord> out;
  for_each_jsonl(path, [&](const nlohmann::json& j) {
    EmbeddingRecord r{j.at("question_id").get<std::string>(), j.at("vector").get<std::vector<double>>()};
    if (r.vector.size() != kEmbeddingDims) {
      throw Error(ErrorCode::Shape, path.string() + ": embedding for " + r.question_id + " has wrong length");
    }
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace aipoll
