#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipoll/config.hpp"
#include "aipoll/corpus.hpp"
#include "aipoll/embedding.hpp"
#include "aipoll/gateway.hpp"
#include "aipoll/util/io.hpp"

namespace aipoll {

/// Stage file names under the output directory.
namespace artifacts {
inline constexpr const char* kHuman = "human_distributions.jsonl";
inline constexpr const char* kDropJson = "drop_report.json";
inline constexpr const char* kDropText = "drop_report.txt";
inline constexpr const char* kPrompts = "prompts.jsonl";
inline constexpr const char* kQueryCache = "cache/queries.jsonl";
inline constexpr const char* kEmbeddingCache = "cache/embeddings.jsonl";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kMetricsSkipped = "metrics_skipped.txt";
inline constexpr const char* kComparisonJson = "comparison.json";
inline constexpr const char* kComparisonText = "comparison.txt";
inline constexpr const char* kEmbeddings = "embeddings.jsonl";
inline constexpr const char* kTagCorrelations = "tag_correlations.csv";
inline constexpr const char* kDesign = "design_matrix.csv";
inline constexpr const char* kStudy = "study.json";
inline constexpr const char* kCoefficients = "coefficients.json";
inline constexpr const char* kModels = "models";
inline constexpr const char* kReport = "report";
inline constexpr const char* kManifest = "manifest.json";
std::string model_distributions(Framework f);
std::string poll_report(Framework f);
std::string model_file(ModelKind kind, Metric target);
}  // namespace artifacts

struct StageResult {
  std::vector<std::filesystem::path> outputs;
  nlohmann::json counts = nlohmann::json::object();
};

struct PollOptions {
  /// Restrict to one framework; otherwise every configured one.
  std::optional<Framework> framework;
  /// Replaces the configured DD variants.
  std::optional<std::vector<PromptVariant>> dd_variants;
  bool retry_failed = false;
  /// Simulated crash after this many backend calls (mock backend only).
  std::optional<std::size_t> abort_after_calls;
  /// Replaces the configured backend.
  ChatBackend* backend = nullptr;
};

struct PredictRequest {
  std::string question_text;
  int cardinality = 5;
  std::string low_label = "low";
  std::string high_label = "high";
  DemographicCell cell;
  PromptVariant variant = comparison_dd_variant();
};

struct PredictResult {
  ModelKind model = ModelKind::RidgeInteractions;
  /// Indexed like kMetrics.
  std::array<double, 3> mean{};
  std::array<double, 3> sd{};

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Stage-file pipeline: each stage reads the previous stages' files from
/// the output directory and writes its own, stamped with the run id.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  const RunConfig& config() const noexcept { return config_; }
  std::filesystem::path out_dir() const { return config_.out_path(); }
  /// Hash of the config (minus the output directory), seed and input hashes.
  const std::string& run_id() const;
  const Provenance& provenance() const;

  StageResult ingest();
  StageResult render();
  StageResult poll(const PollOptions& options = {});
  StageResult metrics();
  StageResult compare();
  StageResult features(EmbeddingBackend* backend = nullptr);
  StageResult fit();
  PredictResult predict(const PredictRequest& request, EmbeddingBackend* backend = nullptr);
  StageResult report();

  const QuestionCorpus& corpus() const;

 private:
  std::filesystem::path artifact(const std::string& name) const { return out_dir() / name; }
  /// Throws Error(MissingArtifact) naming the subcommand that produces it.
  std::filesystem::path require(const std::string& name, const char* producer) const;
  void record_stage(const std::string& stage, const StageResult& result, const std::string& started) const;
  std::unique_ptr<EmbeddingBackend> embedding_backend() const;

  RunConfig config_;
  mutable std::optional<QuestionCorpus> corpus_;
  mutable std::optional<Provenance> provenance_;
};

}  // namespace aipoll
