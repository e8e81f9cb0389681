#include "aipoll/model.hpp"

#include <cmath>
#include <numeric>

#include "aipoll/error.hpp"

namespace aipoll {

std::string_view to_string(Ideology v) noexcept {
  switch (v) {
    case Ideology::VeryLiberal: return "VeryLiberal";
    case Ideology::Liberal: return "Liberal";
    case Ideology::Moderate: return "Moderate";
    case Ideology::Conservative: return "Conservative";
    case Ideology::VeryConservative: return "VeryConservative";
  }
  return "";
}

std::string_view to_string(Gender v) noexcept { return v == Gender::Man ? "Man" : "Woman"; }
std::string_view to_string(Race v) noexcept { return v == Race::White ? "White" : "NonWhite"; }
std::string_view to_string(Framework f) noexcept { return f == Framework::SI ? "SI" : "DD"; }

std::optional<Ideology> parse_ideology(std::string_view s) noexcept {
  for (auto v : kIdeologies) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<Gender> parse_gender(std::string_view s) noexcept {
  for (auto v : kGenders) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<Race> parse_race(std::string_view s) noexcept {
  for (auto v : kRaces) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<Framework> parse_framework(std::string_view s) noexcept {
  if (s == "SI") return Framework::SI;
  if (s == "DD") return Framework::DD;
  return std::nullopt;
}

std::size_t DemographicCell::index() const noexcept {
  return (static_cast<std::size_t>(ideology) * kGenders.size() + static_cast<std::size_t>(gender)) *
             kRaces.size() +
         static_cast<std::size_t>(race);
}

DemographicCell DemographicCell::from_index(std::size_t index) {
  if (index >= kNumCells) {
    throw Error(ErrorCode::InvalidArgument, "cell index out of range: " + std::to_string(index));
  }
  DemographicCell c;
  c.race = kRaces[index % kRaces.size()];
  index /= kRaces.size();
  c.gender = kGenders[index % kGenders.size()];
  c.ideology = kIdeologies[index / kGenders.size()];
  return c;
}

const std::array<DemographicCell, kNumCells>& all_cells() noexcept {
  static const auto cells = [] {
    std::array<DemographicCell, kNumCells> out{};
    for (std::size_t i = 0; i < kNumCells; ++i) out[i] = DemographicCell::from_index(i);
    return out;
  }();
  return cells;
}

void require_supported_cardinality(int cardinality) {
  if (cardinality != 2 && cardinality != 4 && cardinality != 5) {
    throw Error(ErrorCode::InvalidCardinality,
                "cardinality must be 2, 4 or 5, got " + std::to_string(cardinality));
  }
}

Question::Question(std::string id, std::string text, int cardinality, std::string low_label,
                   std::string high_label, std::optional<std::string> tag)
    : id_(std::move(id)),
      text_(std::move(text)),
      cardinality_(cardinality),
      low_label_(std::move(low_label)),
      high_label_(std::move(high_label)),
      tag_(std::move(tag)) {
  require_supported_cardinality(cardinality_);
  if (id_.empty() || id_.find('|') != std::string::npos) {
    throw Error(ErrorCode::Schema, "question id must be non-empty and must not contain '|': '" + id_ + "'");
  }
  if (low_label_.empty() || high_label_.empty()) {
    throw Error(ErrorCode::Schema, "question " + id_ + " needs both scale-endpoint labels");
  }
}

std::vector<double> scaled_positions(int cardinality) {
  if (cardinality < 2) {
    throw Error(ErrorCode::InvalidCardinality,
                "scaled positions need at least 2 categories, got " + std::to_string(cardinality));
  }
  std::vector<double> pos(static_cast<std::size_t>(cardinality));
  const double denom = static_cast<double>(cardinality - 1);
  for (int i = 0; i < cardinality; ++i) pos[static_cast<std::size_t>(i)] = i / denom;
  return pos;
}

OpinionDistribution OpinionDistribution::from_probabilities(std::vector<double> probs) {
  if (probs.size() < 2) throw Error(ErrorCode::Shape, "distribution needs at least 2 categories");
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p)) throw Error(ErrorCode::Parse, "non-finite probability");
    if (p < 0.0) throw Error(ErrorCode::NegativeMass, "negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::Shape, "probabilities sum to " + std::to_string(total) + ", not 1");
  }
  return OpinionDistribution(std::move(probs));
}

OpinionDistribution make_distribution(std::span<const double> raw, int cardinality) {
  if (cardinality < 2 || raw.size() != static_cast<std::size_t>(cardinality)) {
    throw Error(ErrorCode::Shape, "expected " + std::to_string(cardinality) + " entries, got " +
                                      std::to_string(raw.size()));
  }
  double total = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v)) throw Error(ErrorCode::Parse, "non-finite mass");
    if (v < 0.0) throw Error(ErrorCode::NegativeMass, "negative mass " + std::to_string(v));
    total += v;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyDistribution, "total mass is zero");
  std::vector<double> probs(raw.begin(), raw.end());
  for (double& p : probs) p /= total;
  return OpinionDistribution(std::move(probs));
}

PromptVariant PromptVariant::make(Framework framework, bool cot_reminder, bool dist_reminder) {
  if (framework == Framework::SI && (!cot_reminder || dist_reminder)) {
    throw Error(ErrorCode::InvalidArgument,
                "SI prompts always request a justification and never carry the distribution reminder");
  }
  return PromptVariant(framework, cot_reminder, dist_reminder);
}

const std::array<PromptVariant, 4>& all_dd_variants() noexcept {
  static const std::array<PromptVariant, 4> variants{
      PromptVariant::direct_distribution(false, false),
      PromptVariant::direct_distribution(true, false),
      PromptVariant::direct_distribution(false, true),
      PromptVariant::direct_distribution(true, true),
  };
  return variants;
}

std::string PermutationKey::to_string() const {
  std::string out = question_id;
  out += '|';
  out += aipoll::to_string(cell.ideology);
  out += '|';
  out += aipoll::to_string(cell.gender);
  out += '|';
  out += aipoll::to_string(cell.race);
  out += '|';
  out += aipoll::to_string(variant.framework());
  out += variant.cot_reminder() ? "|cot=1" : "|cot=0";
  out += variant.dist_reminder() ? "|dist=1" : "|dist=0";
  return out;
}

PermutationKey PermutationKey::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto bar = text.find('|', start);
    parts.push_back(text.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  const auto fail = [&](const char* why) {
    return Error(ErrorCode::Parse, "bad permutation key '" + std::string(text) + "': " + why);
  };
  if (parts.size() != 7) throw fail("expected 7 fields");
  if (parts[0].empty()) throw fail("empty question id");
  const auto ideology = parse_ideology(parts[1]);
  const auto gender = parse_gender(parts[2]);
  const auto race = parse_race(parts[3]);
  const auto framework = parse_framework(parts[4]);
  if (!ideology || !gender || !race || !framework) throw fail("unknown enum value");
  const auto flag = [&](std::string_view field, std::string_view name) {
    if (field.size() != name.size() + 2 || field.substr(0, name.size()) != name ||
        field[name.size()] != '=' || (field.back() != '0' && field.back() != '1')) {
      throw fail("malformed flag");
    }
    return field.back() == '1';
  };
  PermutationKey key;
  key.question_id = std::string(parts[0]);
  key.cell = DemographicCell{*ideology, *gender, *race};
  key.variant = PromptVariant::make(*framework, flag(parts[5], "cot"), flag(parts[6], "dist"));
  return key;
}

}  // namespace aipoll
