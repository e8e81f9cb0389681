#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipoll/corpus.hpp"
#include "aipoll/gateway.hpp"
#include "aipoll/util/io.hpp"

namespace aipoll {

inline constexpr std::size_t kEmbeddingDims = 100;

struct EmbeddingRecord {
  std::string question_id;
  /// Unit-norm, kEmbeddingDims long.
  std::vector<double> vector;
};

/// Keeps the leading `dims` coordinates and rescales them to unit L2 norm.
/// Throws Error(Shape) if `raw` is shorter than `dims` and
/// Error(InvalidArgument) if the kept prefix is all zeros.
std::vector<double> truncate_renormalize(std::span<const double> raw, std::size_t dims = kEmbeddingDims);

struct EmbeddingConfig {
  /// "http", "fixture" or "hash".
  std::string backend = "hash";
  std::string endpoint = "https://api.openai.com/v1/embeddings";
  std::string model_name = "text-embedding-3-small";
  std::string api_key_env = "OPENAI_API_KEY";
  /// JSON object mapping question text to its full-size vector.
  std::string fixture_path;
  int max_retries = 3;
  double retry_base_seconds = 1.0;
  double timeout_seconds = 60.0;
  /// Output size of the hash backend before truncation.
  int hash_dims = 256;

  nlohmann::json to_json() const;
  static EmbeddingConfig from_json(const nlohmann::json& j);
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  /// Full-size vector for `text`.
  virtual std::vector<double> embed(const std::string& text) = 0;
  /// Identifies the vector space; part of the cache key.
  virtual std::string model_tag() const = 0;
};

/// Deterministic pseudo-embeddings derived from the text hash. Offline
/// stand-in with no semantic content.
class HashEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HashEmbeddingBackend(std::size_t dims = 256) : dims_(dims) {}
  std::vector<double> embed(const std::string& text) override;
  std::string model_tag() const override { return "hash-" + std::to_string(dims_); }

 private:
  std::size_t dims_;
};

class FixtureEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit FixtureEmbeddingBackend(const std::filesystem::path& path);
  explicit FixtureEmbeddingBackend(std::map<std::string, std::vector<double>> vectors, std::string tag = "fixture");
  /// Throws Error(MissingEmbedding) for texts not in the fixture.
  std::vector<double> embed(const std::string& text) override;
  std::string model_tag() const override { return tag_; }

 private:
  std::map<std::string, std::vector<double>> vectors_;
  std::string tag_;
};

/// OpenAI-style `/embeddings` client with retry and backoff.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(EmbeddingConfig config, Sleeper sleep);
  std::vector<double> embed(const std::string& text) override;
  std::string model_tag() const override { return config_.model_name; }

 private:
  EmbeddingConfig config_;
  Sleeper sleep_;
  std::string api_key_;
};

std::unique_ptr<EmbeddingBackend> make_embedding_backend(const EmbeddingConfig& config,
                                                         const std::filesystem::path& base_dir);

/// JSON-lines store of raw vectors keyed by SHA-256 of the text and the
/// backend's model tag.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path path);

  std::optional<std::vector<double>> find(const std::string& text, const std::string& model_tag) const;
  void put(const std::string& text, const std::string& model_tag, const std::vector<double>& vector);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<double>> vectors_;
};

/// One record per question in corpus order. Texts seen before (in the cache
/// or earlier in the corpus) are not re-fetched. Questions whose fetch fails
/// are collected and reported together as Error(MissingEmbedding).
std::vector<EmbeddingRecord> embed_questions(const QuestionCorpus& corpus, EmbeddingBackend& backend,
                                             EmbeddingCache* cache = nullptr);

void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingRecord> records,
                      const Provenance& provenance);
std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);

}  // namespace aipoll
