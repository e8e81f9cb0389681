#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipoll/model.hpp"

namespace aipoll {

/// The question set of a study, plus the closed set of topic tags.
///
/// File format (JSON):
///   { "tags": ["Gun Policy", ...],
///     "questions": [ { "id": "...", "text": "...", "cardinality": 5,
///                      "low_label": "...", "high_label": "...",
///                      "tag": "Gun Policy" }, ... ] }
///
/// Ids must be unique and every tag must belong to `tags`.
class QuestionCorpus {
 public:
  QuestionCorpus() = default;
  QuestionCorpus(std::vector<Question> questions, std::vector<std::string> tags);

  static QuestionCorpus from_json(const nlohmann::json& doc);
  static QuestionCorpus load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::vector<Question>& questions() const noexcept { return questions_; }
  const std::vector<std::string>& tags() const noexcept { return tags_; }
  std::size_t size() const noexcept { return questions_.size(); }

  /// nullptr when the id is unknown.
  const Question* find(const std::string& id) const;
  const Question& at(const std::string& id) const;

 private:
  std::vector<Question> questions_;
  std::vector<std::string> tags_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace aipoll
