#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipoll/features.hpp"
#include "aipoll/metrics.hpp"
#include "aipoll/regression.hpp"

namespace aipoll {

enum class StudyFramework { DD, SI, Difference };
inline constexpr std::array kStudyFrameworks{StudyFramework::DD, StudyFramework::SI, StudyFramework::Difference};
/// "DD", "SI", "SI-DD".
std::string_view to_string(StudyFramework f) noexcept;
std::optional<StudyFramework> parse_study_framework(std::string_view s) noexcept;

enum class ModelKind { Ridge, RidgeInteractions, Gbm };
inline constexpr std::array kModelKinds{ModelKind::Ridge, ModelKind::RidgeInteractions, ModelKind::Gbm};
/// File-name form: "ridge", "ridge_ix", "gbm".
std::string_view to_string(ModelKind m) noexcept;
std::string_view display_name(ModelKind m) noexcept;
std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept;
inline bool uses_interactions(ModelKind m) noexcept { return m == ModelKind::RidgeInteractions; }

/// Rows and the three targets for one framework.
struct StudyDataset {
  std::vector<FeatureRow> rows;
  /// Indexed like kMetrics.
  std::array<std::vector<double>, 3> targets;
};

/// DD: every DD row. SI: every SI row. SI-DD: SI rows paired with the
/// comparison DD variant on (question, cell), target SI minus DD, keyed by
/// the SI row so prompt flags are zero.
StudyDataset study_dataset(StudyFramework framework, std::span<const ComparisonRow> rows);

struct StudyOptions {
  SplitSpec split;
  RidgeOptions ridge;
  GbmOptions gbm;
};

struct StudyCell {
  StudyFramework framework = StudyFramework::DD;
  ModelKind model = ModelKind::Ridge;
  Metric metric = Metric::NEMD;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::optional<double> train_r2;
  std::optional<double> test_r2;
  /// Why the cell has no fit; empty otherwise.
  std::string unavailable;
};

struct StudyReport {
  QuestionSplit split;
  double test_fraction = 0.2;
  std::vector<StudyCell> cells;

  const StudyCell& at(StudyFramework f, ModelKind m, Metric metric) const;
  nlohmann::json to_json() const;
  static StudyReport from_json(const nlohmann::json& j);
};

/// A fitted model plus everything needed to score new rows.
struct TrainedModel {
  ModelKind kind = ModelKind::Ridge;
  Metric target = Metric::NEMD;
  StudyFramework framework = StudyFramework::DD;
  std::vector<std::string> features;
  ScalerState scaler;
  std::optional<RidgeFit> ridge;
  std::optional<GbmFit> gbm;

  struct Prediction {
    Eigen::VectorXd mean;
    /// Empty for models without a predictive distribution.
    Eigen::VectorXd sd;
  };
  Prediction predict(std::span<const FeatureRow> rows, const Eigen::MatrixXd& raw_embeddings) const;

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);
};

/// Fits one model on `train` (scaler fitted on those rows only).
TrainedModel train_model(ModelKind kind, Metric target, StudyFramework framework, std::span<const FeatureRow> rows,
                         const Eigen::MatrixXd& raw_embeddings, std::span<const double> y, const StudyOptions& options);

/// Every framework x model x metric cell on one shared question split.
StudyReport run_study(std::span<const ComparisonRow> rows, const EmbeddingIndex& embeddings,
                      const StudyOptions& options);

struct MetricStats {
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Ridge without interactions fitted on every DD row, one fit per metric.
struct CoefficientTable {
  std::size_t n_rows = 0;
  std::array<std::vector<Coefficient>, 3> coefficients;
  std::array<MetricStats, 3> stats;
  std::array<std::optional<double>, 3> r2;

  nlohmann::json to_json() const;
  static CoefficientTable from_json(const nlohmann::json& j);
};

CoefficientTable coefficient_table(std::span<const ComparisonRow> rows, const EmbeddingIndex& embeddings,
                                   const RidgeOptions& options);

}  // namespace aipoll
