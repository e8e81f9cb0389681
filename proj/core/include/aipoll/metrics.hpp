#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipoll/gateway.hpp"
#include "aipoll/model.hpp"
#include "aipoll/survey.hpp"
#include "aipoll/util/io.hpp"

namespace aipoll {

/// Mean on the [0, 1] grid.
double scaled_mean(const OpinionDistribution& d);
/// Population SD on the [0, 1] grid.
double scaled_sd(const OpinionDistribution& d);

/// |mean(human) - mean(model)|.
double md(const OpinionDistribution& human, const OpinionDistribution& model);
/// SD(model) - SD(human); positive when the model spreads wider than people do.
double sdd(const OpinionDistribution& human, const OpinionDistribution& model);
/// Wasserstein-1 distance on the [0, 1] grid: mean absolute CDF gap.
double nemd(const OpinionDistribution& human, const OpinionDistribution& model);

enum class Metric { NEMD, MD, SDD };
inline constexpr std::array kMetrics{Metric::NEMD, Metric::MD, Metric::SDD};
std::string_view to_string(Metric m) noexcept;
std::optional<Metric> parse_metric(std::string_view s) noexcept;

struct ComparisonRow {
  PermutationKey key;
  int cardinality = 0;
  int n_human = 0;
  double nemd = 0.0;
  double md = 0.0;
  double sdd = 0.0;
  double human_sd = 0.0;
  double model_sd = 0.0;

  double value(Metric m) const noexcept;
};

ComparisonRow compare(const PermutationKey& key, int n_human, const OpinionDistribution& human,
                      const OpinionDistribution& model);

struct SkippedPermutation {
  PermutationKey key;
  std::string reason;
};

struct MetricsResult {
  std::vector<ComparisonRow> rows;
  std::vector<SkippedPermutation> skipped;
};

/// Scores every model distribution against the human distribution of its
/// (question, cell). Failed polls and empty human cells are skipped, not
/// errors.
MetricsResult compute_metrics(std::span<const HumanCellDistribution> human,
                              std::span<const ModelDistribution> model);

/// Rows of one prompt variant, in input order.
std::vector<ComparisonRow> select_variant(std::span<const ComparisonRow> rows, const PromptVariant& variant);

struct PairedComparison {
  Metric metric = Metric::NEMD;
  std::size_t n_pairs = 0;
  /// Share of pairs where DD beats SI: lower value for NEMD and MD, lower
  /// magnitude for SDD. Ties are not wins.
  double win_fraction = 0.0;
  /// Mean of SI - DD.
  double mean_diff = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  nlohmann::json to_json() const;
};

/// Pairs SI and DD rows on (question, cell). Throws Error(Alignment) when a
/// row has no partner, a pair is duplicated, or there are no pairs.
PairedComparison paired_compare(std::span<const ComparisonRow> si, std::span<const ComparisonRow> dd, Metric metric);

struct MetricSummary {
  Metric metric = Metric::NEMD;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
};

MetricSummary summarize(std::span<const ComparisonRow> rows, Metric metric);

/// Sample mean, sample SD (n - 1) and SD / sqrt(n). NaN where undefined.
struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
};
SampleStats sample_stats(std::span<const double> values);

struct BandPoint {
  double x = 0.0;
  std::size_t n = 0;
  double mean = 0.0;
  double se = 0.0;
  double lo = 0.0;  // mean - 2 se
  double hi = 0.0;  // mean + 2 se
};

/// Windowed mean of y centred on each distinct x, over points with
/// |x - centre| <= window / 2. Centres with fewer than two points emit
/// nothing.
std::vector<BandPoint> moving_average_band(std::span<const double> x, std::span<const double> y, double window);

void write_metrics_csv(const std::filesystem::path& path, std::span<const ComparisonRow> rows,
                       const Provenance& provenance);
std::vector<ComparisonRow> read_metrics_csv(const std::filesystem::path& path);

}  // namespace aipoll
