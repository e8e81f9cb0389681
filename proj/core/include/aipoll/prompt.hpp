#pragma once

#include <string>
#include <string_view>

#include "aipoll/model.hpp"

namespace aipoll {

/// Shape of the JSON object the backend is asked to return.
enum class ExpectedSchema { ScoreWithJustification, DistributionWithJustification, DistributionOnly };

std::string_view to_string(ExpectedSchema s) noexcept;
ExpectedSchema expected_schema_for(const PromptVariant& variant) noexcept;

struct RenderedPrompt {
  PermutationKey key;
  std::string text;
  ExpectedSchema expected_schema;
  int cardinality;
};

/// Surface words substituted into the templates.
struct DemographicWords {
  std::string_view ideology;
  std::string_view gender;
  std::string_view race;
};

DemographicWords demographic_phrase(const DemographicCell& cell) noexcept;

/// Renders the prompt for one permutation. Pure: same inputs, same bytes.
RenderedPrompt render(const Question& question, const DemographicCell& cell, const PromptVariant& variant);

}  // namespace aipoll
