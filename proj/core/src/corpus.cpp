#include "aipoll/corpus.hpp"

#include <algorithm>
#include <set>

#include "aipoll/error.hpp"
#include "aipoll/util/io.hpp"

namespace aipoll {

QuestionCorpus::QuestionCorpus(std::vector<Question> questions, std::vector<std::string> tags)
    : questions_(std::move(questions)), tags_(std::move(tags)) {
  std::set<std::string> tag_set(tags_.begin(), tags_.end());
  if (tag_set.size() != tags_.size()) throw Error(ErrorCode::Schema, "duplicate tag in tag set");
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    const auto& q = questions_[i];
    if (!index_.emplace(q.id(), i).second) {
      throw Error(ErrorCode::Schema, "duplicate question id " + q.id());
    }
    if (q.tag() && !tag_set.contains(*q.tag())) {
      throw Error(ErrorCode::Schema, "question " + q.id() + " has tag '" + *q.tag() +
                                         "' outside the declared tag set");
    }
  }
}

QuestionCorpus QuestionCorpus::from_json(const nlohmann::json& doc) {
  try {
    std::vector<std::string> tags;
    if (doc.contains("tags")) tags = doc.at("tags").get<std::vector<std::string>>();
    std::vector<Question> questions;
    for (const auto& q : doc.at("questions")) {
      std::optional<std::string> tag;
      if (q.contains("tag") && !q.at("tag").is_null()) tag = q.at("tag").get<std::string>();
      questions.emplace_back(q.at("id").get<std::string>(), q.at("text").get<std::string>(),
                             q.at("cardinality").get<int>(), q.at("low_label").get<std::string>(),
                             q.at("high_label").get<std::string>(), std::move(tag));
    }
    return QuestionCorpus(std::move(questions), std::move(tags));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("question corpus: ") + e.what());
  }
}

QuestionCorpus QuestionCorpus::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json QuestionCorpus::to_json() const {
  nlohmann::json qs = nlohmann::json::array();
  for (const auto& q : questions_) {
    nlohmann::json j = {{"id", q.id()},
                        {"text", q.text()},
                        {"cardinality", q.cardinality()},
                        {"low_label", q.low_label()},
                        {"high_label", q.high_label()}};
    if (q.tag()) j["tag"] = *q.tag();
    qs.push_back(std::move(j));
  }
  return {{"tags", tags_}, {"questions", std::move(qs)}};
}

const Question* QuestionCorpus::find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &questions_[it->second];
}

const Question& QuestionCorpus::at(const std::string& id) const {
  if (const auto* q = find(id)) return *q;
  throw Error(ErrorCode::InvalidArgument, "unknown question id " + id);
}

}  // namespace aipoll
