#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aipoll {

// ---------------------------------------------------------------------------
// Demographics
// ---------------------------------------------------------------------------

enum class Ideology { VeryLiberal, Liberal, Moderate, Conservative, VeryConservative };
enum class Gender { Man, Woman };
enum class Race { White, NonWhite };

inline constexpr std::array kIdeologies{Ideology::VeryLiberal, Ideology::Liberal,
                                        Ideology::Moderate, Ideology::Conservative,
                                        Ideology::VeryConservative};
inline constexpr std::array kGenders{Gender::Man, Gender::Woman};
inline constexpr std::array kRaces{Race::White, Race::NonWhite};

std::string_view to_string(Ideology v) noexcept;
std::string_view to_string(Gender v) noexcept;
std::string_view to_string(Race v) noexcept;
std::optional<Ideology> parse_ideology(std::string_view s) noexcept;
std::optional<Gender> parse_gender(std::string_view s) noexcept;
std::optional<Race> parse_race(std::string_view s) noexcept;

/// One ideology x gender x race conditioning cell.
struct DemographicCell {
  Ideology ideology = Ideology::Moderate;
  Gender gender = Gender::Man;
  Race race = Race::White;

  /// Position in the canonical ideology-major enumeration, 0..19.
  std::size_t index() const noexcept;
  static DemographicCell from_index(std::size_t index);

  auto operator<=>(const DemographicCell&) const = default;
};

inline constexpr std::size_t kNumCells = kIdeologies.size() * kGenders.size() * kRaces.size();

/// All 20 cells in canonical order.
const std::array<DemographicCell, kNumCells>& all_cells() noexcept;

// ---------------------------------------------------------------------------
// Questions
// ---------------------------------------------------------------------------

/// Throws Error(InvalidCardinality) unless cardinality is 2, 4 or 5.
void require_supported_cardinality(int cardinality);

/// A survey item. Immutable once constructed; the constructor enforces the
/// cardinality and label invariants.
class Question {
 public:
  Question(std::string id, std::string text, int cardinality, std::string low_label,
           std::string high_label, std::optional<std::string> tag = std::nullopt);

  const std::string& id() const noexcept { return id_; }
  const std::string& text() const noexcept { return text_; }
  int cardinality() const noexcept { return cardinality_; }
  const std::string& low_label() const noexcept { return low_label_; }
  const std::string& high_label() const noexcept { return high_label_; }
  const std::optional<std::string>& tag() const noexcept { return tag_; }

 private:
  std::string id_;
  std::string text_;
  int cardinality_;
  std::string low_label_;
  std::string high_label_;
  std::optional<std::string> tag_;
};

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

/// Category positions on the [0, 1] grid: (i - 1) / (C - 1) for i = 1..C.
std::vector<double> scaled_positions(int cardinality);

/// Probability vector over an ordinal scale. Entries are non-negative and
/// sum to 1 within 1e-9.
class OpinionDistribution {
 public:
  /// Validates an already-normalized vector.
  static OpinionDistribution from_probabilities(std::vector<double> probs);

  int cardinality() const noexcept { return static_cast<int>(probs_.size()); }
  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::size_t i) const noexcept { return probs_[i]; }

  bool operator==(const OpinionDistribution&) const = default;

 private:
  explicit OpinionDistribution(std::vector<double> probs) : probs_(std::move(probs)) {}
  friend OpinionDistribution make_distribution(std::span<const double>, int);

  std::vector<double> probs_;
};

/// Normalizes raw non-negative mass (counts, percentages) to probabilities.
OpinionDistribution make_distribution(std::span<const double> raw, int cardinality);

// ---------------------------------------------------------------------------
// Prompt variants and permutation keys
// ---------------------------------------------------------------------------

enum class Framework { SI, DD };

std::string_view to_string(Framework f) noexcept;
std::optional<Framework> parse_framework(std::string_view s) noexcept;

/// SI always carries the justification request and never the distribution
/// reminder; DD can toggle both.
class PromptVariant {
 public:
  static PromptVariant single_individual() noexcept { return PromptVariant(Framework::SI, true, false); }
  static PromptVariant direct_distribution(bool cot_reminder, bool dist_reminder) noexcept {
    return PromptVariant(Framework::DD, cot_reminder, dist_reminder);
  }
  /// Validating factory for values read from files or the command line.
  static PromptVariant make(Framework framework, bool cot_reminder, bool dist_reminder);

  Framework framework() const noexcept { return framework_; }
  bool cot_reminder() const noexcept { return cot_; }
  bool dist_reminder() const noexcept { return dist_; }

  auto operator<=>(const PromptVariant&) const = default;

 private:
  PromptVariant(Framework f, bool cot, bool dist) noexcept : framework_(f), cot_(cot), dist_(dist) {}

  Framework framework_;
  bool cot_;
  bool dist_;
};

/// The four DD variants in fixed order: none, cot, dist, cot+dist.
const std::array<PromptVariant, 4>& all_dd_variants() noexcept;

/// The DD variant paired against SI in framework comparisons.
inline PromptVariant comparison_dd_variant() noexcept {
  return PromptVariant::direct_distribution(true, false);
}

/// Identifies one (question, cell, variant) elicitation.
struct PermutationKey {
  std::string question_id;
  DemographicCell cell;
  PromptVariant variant = PromptVariant::single_individual();

  /// `<question_id>|<ideology>|<gender>|<race>|<framework>|cot=<0/1>|dist=<0/1>`
  std::string to_string() const;
  static PermutationKey parse(std::string_view text);

  auto operator<=>(const PermutationKey&) const = default;
};

}  // namespace aipoll
