#include "aipoll/prompt.hpp"

namespace aipoll {

std::string_view to_string(ExpectedSchema s) noexcept {
  switch (s) {
    case ExpectedSchema::ScoreWithJustification: return "ScoreWithJustification";
    case ExpectedSchema::DistributionWithJustification: return "DistributionWithJustification";
    case ExpectedSchema::DistributionOnly: return "DistributionOnly";
  }
  return "";
}

ExpectedSchema expected_schema_for(const PromptVariant& variant) noexcept {
  if (variant.framework() == Framework::SI) return ExpectedSchema::ScoreWithJustification;
  return variant.cot_reminder() ? ExpectedSchema::DistributionWithJustification
                                : ExpectedSchema::DistributionOnly;
}

DemographicWords demographic_phrase(const DemographicCell& cell) noexcept {
  DemographicWords w{};
  switch (cell.ideology) {
    case Ideology::VeryLiberal: w.ideology = "Very liberal"; break;
    case Ideology::Liberal: w.ideology = "Liberal"; break;
    case Ideology::Moderate: w.ideology = "Moderate"; break;
    case Ideology::Conservative: w.ideology = "Conservative"; break;
    case Ideology::VeryConservative: w.ideology = "Very conservative"; break;
  }
  w.gender = cell.gender == Gender::Man ? "Man" : "Woman";
  w.race = cell.race == Race::White ? "White" : "Non-white";
  return w;
}

RenderedPrompt render(const Question& question, const DemographicCell& cell, const PromptVariant& variant) {
  const auto words = demographic_phrase(cell);
  const std::string ideology(words.ideology);
  const std::string gender(words.gender);
  const std::string race(words.race);
  const std::string c = std::to_string(question.cardinality());
  const bool si = variant.framework() == Framework::SI;

  std::string text;
  if (si) {
    text = "Please represent the opinion of an individual selected at random from the politically ";
  } else {
    text = "Please represent the distribution of opinions of the politically ";
  }
  text += ideology + " " + gender + " populace living in the United States who identify as " + race +
          " on the policy proposal to: \"" + question.text() + "\" where ";
  text += si ? "the person's" : "a person's";
  text += " position on the issue is on a " + c + "-point scale, with 1 representing the position \"" +
          question.low_label() + "\" and " + c + " represents the position \"" + question.high_label() + "\".";

  if (si) {
    text += " Write a brief 1 sentence justification on the beliefs of the selected " + race + " " + ideology +
            " " + gender +
            " individual which motivates the score. Following the justification, report the score the "
            "individual would select. Report the justification and score via the \"justification\" and "
            "\"score\" JSON keys.";
  } else {
    if (variant.cot_reminder()) {
      text += " Write a brief 1 sentence justification on the beliefs of the selected " + race + " " +
              ideology + " " + gender + " populace, and infer the mean and spread of the distribution.";
    }
    if (variant.dist_reminder()) {
      text += " Note the distribution need not be normal, symmetric, or encompass all category options.";
    }
    text += variant.cot_reminder() ? " Following the justification, report" : " Report";
    text += " the proportion of individuals that would select each position as a list of decimals, such "
            "that the sum of all decimals is 100. The list should contain exactly " +
            c + " numbers.";
    if (variant.cot_reminder()) {
      text += " Report the justification and distribution via the \"justification\" and \"distribution\" JSON "
              "keys.";
    } else {
      text += " Report the distribution via the \"distribution\" JSON key. Leave the \"justification\" JSON "
              "key as an empty string: Do not report any justification for the distribution.";
    }
  }

  return RenderedPrompt{PermutationKey{question.id(), cell, variant}, std::move(text),
                        expected_schema_for(variant), question.cardinality()};
}

}  // namespace aipoll
