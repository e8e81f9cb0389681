#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipoll/embedding.hpp"
#include "aipoll/gateway.hpp"
#include "aipoll/model.hpp"
#include "aipoll/regression.hpp"
#include "aipoll/study.hpp"

namespace aipoll {

/// Offline backend settings. With `truth_from_human` the mock answers from
/// the ingested human distributions.
struct MockConfig {
  std::string script;
  bool truth_from_human = false;
  double dd_noise_sd = 2.0;
  double si_mode_collapse = 0.0;

  nlohmann::json to_json() const;
  static MockConfig from_json(const nlohmann::json& j);
};

/// Everything a run needs. File paths are relative to the config file.
///
///   { "inputs":   {"questions", "respondents", "mapping" (path or object),
///                  "weight_column", "weighted"},
///     "out_dir", "seed",
///     "poll":     {"backend": "http" | "mock", "frameworks": ["SI", "DD"],
///                  "dd_variants": [{"cot": true, "dist": false}, ...]},
///     "backend":  {...},  "mock": {...},  "embedding": {...},
///     "split":    {"test_fraction"},
///     "ridge":    {"max_iter", "tol"},
///     "gbm":      {"n_trees", "learning_rate", "max_depth", "min_samples_leaf"},
///     "features": {"export_interactions"},
///     "report":   {"band_window"},
///     "predict":  {"model": "ridge" | "ridge_ix"} }
struct RunConfig {
  std::filesystem::path base_dir = ".";

  std::string questions;
  std::string respondents;
  nlohmann::json mapping;
  std::optional<std::string> weight_column;
  bool weighted = false;

  std::string out_dir = "out";
  std::uint64_t seed = 0;

  std::string backend_kind = "http";
  std::vector<Framework> frameworks{Framework::SI, Framework::DD};
  std::vector<PromptVariant> dd_variants{all_dd_variants().begin(), all_dd_variants().end()};
  BackendConfig backend;
  MockConfig mock;
  EmbeddingConfig embedding;

  double test_fraction = 0.2;
  RidgeOptions ridge;
  GbmOptions gbm;
  bool export_interactions = true;
  double band_window = 0.1;
  ModelKind predict_model = ModelKind::RidgeInteractions;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);
  /// Snapshot for manifests. Holds the API key variable's name, never a key.
  nlohmann::json to_json() const;

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path out_path() const { return resolve(out_dir); }
  std::vector<PromptVariant> variants() const;
};

}  // namespace aipoll
