#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipoll/features.hpp"
#include "aipoll/metrics.hpp"
#include "aipoll/study.hpp"

namespace aipoll {

/// Column-aligned text table that can also be emitted as CSV. The first
/// column is left-aligned, the rest right-aligned.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header);
  void add_row(std::vector<std::string> cells);
  /// Horizontal rule in text output; skipped in CSV.
  void add_rule();
  std::string to_text() const;
  std::string to_csv() const;
  std::size_t rows() const noexcept;

 private:
  std::vector<std::string> header_;
  /// Empty vector marks a rule.
  std::vector<std::vector<std::string>> rows_;
};

/// Fixed decimals; NaN and missing print as "n/a".
std::string fmt(double v, int decimals = 3);
std::string fmt(const std::optional<double>& v, int decimals = 3);

/// "SI", "DD", "DD+cot", "DD+dist", "DD+cot+dist".
std::string variant_label(const PromptVariant& v);

struct VariantSummary {
  PromptVariant variant = PromptVariant::single_individual();
  std::array<MetricSummary, 3> metrics;
};

struct ComparisonReport {
  std::size_t n_si = 0;
  std::size_t n_dd = 0;
  /// Cells with only one of the two frameworks; left out of the pairing.
  std::size_t n_unpaired = 0;
  std::vector<PairedComparison> paired;
  std::vector<VariantSummary> variants;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Pairs SI with the comparison DD variant on the (question, cell) cells both
/// frameworks cover, and summarizes every variant present.
ComparisonReport build_comparison(std::span<const ComparisonRow> rows);

/// One-hot coefficients per metric (significant ones starred) followed by
/// metric mean, SD, min, max and in-sample R^2.
TextTable coefficient_table_text(const CoefficientTable& t);
/// Significant embedding coefficients, one row per (metric, dimension).
TextTable embedding_coefficients_text(const CoefficientTable& t);
/// Training and testing R^2 for one framework, one row per model.
TextTable study_table_text(const StudyReport& r, StudyFramework f);

/// Strongest significant embedding dimensions of `metric`'s fit, by
/// |coefficient|, at most `max_dims`.
std::vector<std::size_t> significant_embedding_dims(const CoefficientTable& t, Metric metric, std::size_t max_dims);
/// Tags x selected dimensions; |r| > 0.25 starred.
TextTable tag_table_text(const TagCorrelations& tc, std::span<const std::size_t> dims);

TextTable band_table_text(std::span<const BandPoint> band);

}  // namespace aipoll
