#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipoll/corpus.hpp"
#include "aipoll/model.hpp"
#include "aipoll/util/io.hpp"

namespace aipoll {

/// One survey respondent as read from the microdata file. Demographic
/// answers stay in their source coding until classified.
struct RespondentRecord {
  std::string respondent_id;
  std::string ideology_raw;
  std::string gender_raw;
  std::string race_raw;
  double weight = 1.0;
  /// question_id -> category in 1..C; item non-response is simply absent.
  std::map<std::string, int> answers;
};

/// Source-code to cell mapping. Lives in configuration because codebooks
/// differ across survey waves.
///
/// JSON shape:
///   { "ideology": {"1": "VeryLiberal", ...},
///     "gender":   {"1": "Man", "2": "Woman"},
///     "race":     {"1": "White", "2": "NonWhite", ...},
///     "missing":  {"ideology": ["6", "8"], "gender": ["8"], "race": []},
///     "non_binary_gender": ["3", "4"] }
///
/// An empty field always counts as missing.
struct DemographicMapping {
  std::map<std::string, Ideology> ideology;
  std::map<std::string, Gender> gender;
  std::map<std::string, Race> race;
  std::set<std::string> missing_ideology;
  std::set<std::string> missing_gender;
  std::set<std::string> missing_race;
  std::set<std::string> non_binary_gender;

  static DemographicMapping from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

enum class DropReason { MissingDemographic, OutsideBinarySchema, UnmappedCode };
inline constexpr std::array kDropReasons{DropReason::MissingDemographic, DropReason::OutsideBinarySchema,
                                         DropReason::UnmappedCode};
std::string_view to_string(DropReason r) noexcept;

struct Dropped {
  DropReason reason;
  std::string detail;
};

using Classification = std::variant<DemographicCell, Dropped>;

/// Maps a respondent to its cell. Any missing field takes precedence, then a
/// non-binary gender code, then unmapped codes.
Classification classify(const RespondentRecord& record, const DemographicMapping& mapping);

struct HumanCellDistribution {
  std::string question_id;
  DemographicCell cell;
  int n_respondents = 0;
  /// Per-category tallies (weight sums when weighting is enabled).
  std::vector<double> counts;
  OpinionDistribution distribution;
};

struct EmptyCell {
  std::string question_id;
  DemographicCell cell;
};

struct AggregateOptions {
  /// Use RespondentRecord::weight instead of unit tallies.
  bool weighted = false;
};

struct AggregateResult {
  /// Corpus question order, then canonical cell order.
  std::vector<HumanCellDistribution> distributions;
  /// (question, cell) pairs with no respondents; excluded downstream.
  std::vector<EmptyCell> empty_cells;
};

/// Tallies answers per (question, cell). Unclassifiable respondents are
/// dropped everywhere; a missing answer only removes the respondent from that
/// question's tally.
AggregateResult aggregate(std::span<const RespondentRecord> records, const QuestionCorpus& corpus,
                          const DemographicMapping& mapping, const AggregateOptions& options = {});

struct DropReport {
  std::size_t total = 0;
  std::size_t classified = 0;
  std::size_t dropped = 0;
  std::map<DropReason, std::size_t> counts;

  double fraction(DropReason reason) const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

DropReport drop_report(std::span<const RespondentRecord> records, const DemographicMapping& mapping);

/// Reads comma-separated microdata: header row with respondent_id, ideology,
/// gender, race, then one column per question id (plus the optional weight
/// column). Throws Error(Schema) on missing columns or out-of-range answers.
std::vector<RespondentRecord> read_respondents_csv(const std::filesystem::path& path,
                                                   const QuestionCorpus& corpus,
                                                   const std::optional<std::string>& weight_column = std::nullopt);

nlohmann::json to_json(const HumanCellDistribution& d);
HumanCellDistribution human_distribution_from_json(const nlohmann::json& j);

void write_human_distributions(const std::filesystem::path& path,
                               std::span<const HumanCellDistribution> distributions,
                               const Provenance& provenance);
std::vector<HumanCellDistribution> read_human_distributions(const std::filesystem::path& path);

nlohmann::json cell_to_json(const DemographicCell& cell);
DemographicCell cell_from_json(const nlohmann::json& j);

}  // namespace aipoll
