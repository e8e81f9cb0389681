#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "aipoll/corpus.hpp"
#include "aipoll/embedding.hpp"
#include "aipoll/model.hpp"
#include "aipoll/util/io.hpp"

namespace aipoll {

// Column layout. Reference categories (Moderate, Man, White, cardinality 5,
// no reminders) encode as zeros.
inline constexpr std::array<std::string_view, 10> kBaseColumns{
    "ideo_very_conservative", "ideo_conservative", "ideo_liberal", "ideo_very_liberal", "race_non_white",
    "gender_woman",           "prompt_cot",        "prompt_dist",  "card_2",            "card_4"};
/// Base columns that are crossed with every embedding dimension, in order.
inline constexpr std::array<std::string_view, 6> kInteractionDemographics{
    "very_conservative", "conservative", "liberal", "very_liberal", "non_white", "woman"};

inline constexpr std::size_t kBaseWidth = kBaseColumns.size();
inline constexpr std::size_t kPlainWidth = kBaseWidth + kEmbeddingDims;
inline constexpr std::size_t kInteractionWidth = kPlainWidth + kInteractionDemographics.size() * kEmbeddingDims;

/// `emb_000`.
std::string embedding_column(std::size_t dim);
std::vector<std::string> feature_names(bool with_interactions);

/// The 10 one-hots. SI keys never carry prompt flags.
std::array<double, kBaseWidth> base_features(const PermutationKey& key, int cardinality);

/// Per-dimension z-scoring fitted on training rows (population SD).
struct ScalerState {
  std::vector<double> mean;
  std::vector<double> sd;
  /// Dimensions with zero training variance; their SD is stored as 1.
  std::vector<bool> degenerate;

  nlohmann::json to_json() const;
  static ScalerState from_json(const nlohmann::json& j);
};

ScalerState fit_scaler(const Eigen::MatrixXd& train_rows);
Eigen::MatrixXd apply_scaler(const ScalerState& state, const Eigen::MatrixXd& rows);

/// Full feature vector for one row; `scaled_embedding` is already scaled.
std::vector<double> build_features(const PermutationKey& key, int cardinality,
                                   std::span<const double> scaled_embedding, bool with_interactions);

struct FeatureRow {
  PermutationKey key;
  int cardinality = 0;
};

using EmbeddingIndex = std::map<std::string, std::vector<double>>;
EmbeddingIndex index_embeddings(std::span<const EmbeddingRecord> records);

/// Raw embedding of each row's question, one row per FeatureRow. Throws
/// Error(MissingEmbedding) naming the first question without a vector.
Eigen::MatrixXd embedding_matrix(std::span<const FeatureRow> rows, const EmbeddingIndex& embeddings);

/// Design matrix from rows and their already-scaled embeddings.
Eigen::MatrixXd build_design(std::span<const FeatureRow> rows, const Eigen::MatrixXd& scaled_embeddings,
                             bool with_interactions);

/// Delimited export: `key`, every feature column, then one column per target.
void write_design_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows, const Eigen::MatrixXd& X,
                      bool with_interactions, const std::vector<std::pair<std::string, std::vector<double>>>& targets,
                      const Provenance& provenance);

/// Pearson r; nullopt when either input has zero variance or fewer than two
/// points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct TagCorrelations {
  std::vector<std::string> tags;
  /// [tag][dim]
  std::vector<std::vector<std::optional<double>>> r;
};

/// Correlation across questions between each tag's 0/1 indicator and each
/// embedding dimension.
TagCorrelations tag_correlations(const QuestionCorpus& corpus, const EmbeddingIndex& embeddings);

void write_tag_correlations_csv(const std::filesystem::path& path, const TagCorrelations& t,
                                const Provenance& provenance);

}  // namespace aipoll
