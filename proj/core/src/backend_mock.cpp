#include <algorithm>

#include "aipoll/error.hpp"
#include "aipoll/mock_backend.hpp"
#include "aipoll/util/io.hpp"
#include "aipoll/util/rng.hpp"

namespace aipoll {

bool glob_match(std::string_view pattern, std::string_view text) noexcept {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::string truth_key(const std::string& question_id, const DemographicCell& cell) {
  return question_id + "|" + std::string(to_string(cell.ideology)) + "|" + std::string(to_string(cell.gender)) +
         "|" + std::string(to_string(cell.race));
}

void MockChatBackend::add_script(std::vector<MockScriptEntry> entries) {
  for (auto& e : entries) {
    if (e.replies.empty()) throw Error(ErrorCode::InvalidArgument, "mock entry '" + e.pattern + "' has no replies");
    script_.push_back(std::move(e));
  }
}

void MockChatBackend::load_script_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  std::vector<MockScriptEntry> entries;
  try {
    for (const auto& e : doc.at("entries")) {
      MockScriptEntry entry;
      entry.pattern = e.at("match").get<std::string>();
      entry.by_repeat = e.value("by_repeat", false);
      for (const auto& r : e.at("replies")) {
        MockReply reply;
        reply.status = r.value("status", 200);
        if (r.contains("content")) {
          const auto& c = r.at("content");
          reply.content = c.is_string() ? c.get<std::string>() : c.dump();
        }
        entry.replies.push_back(std::move(reply));
      }
      entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  }
  add_script(std::move(entries));
}

void MockChatBackend::set_truth(std::map<std::string, OpinionDistribution> truth, MockTruthOptions options) {
  truth_ = std::move(truth);
  truth_options_ = options;
}

std::string MockChatBackend::complete(const CompletionRequest& request) {
  const std::size_t n = calls_.fetch_add(1);
  if (abort_after_ && n >= *abort_after_) throw Error(ErrorCode::Auth, "mock backend: simulated abort");

  const std::string key = request.key.to_string();
  for (const auto& entry : script_) {
    if (!glob_match(entry.pattern, key)) continue;
    std::size_t idx;
    if (entry.by_repeat) {
      idx = static_cast<std::size_t>(request.repeat_index) % entry.replies.size();
    } else {
      std::lock_guard lock(mutex_);
      const int attempt = attempts_[key + "#" + std::to_string(request.repeat_index)]++;
      idx = std::min(static_cast<std::size_t>(attempt), entry.replies.size() - 1);
    }
    const auto& reply = entry.replies[idx];
    if (reply.status == 200) return reply.content;
    if (reply.status >= 400 && reply.status < 500 && reply.status != 408 && reply.status != 429) {
      throw Error(ErrorCode::Auth, "mock backend: HTTP " + std::to_string(reply.status));
    }
    throw Error(ErrorCode::Backend, "mock backend: HTTP " + std::to_string(reply.status));
  }
  if (!truth_.empty()) return truth_reply(request);
  throw Error(ErrorCode::Backend, "mock backend: no scripted reply for " + key);
}

std::string MockChatBackend::truth_reply(const CompletionRequest& request) const {
  const auto tkey = truth_key(request.key.question_id, request.key.cell);
  const auto it = truth_.find(tkey);
  if (it == truth_.end()) throw Error(ErrorCode::Backend, "mock backend: no truth for " + tkey);
  const auto probs = it->second.probs();
  const std::uint64_t seed = truth_options_.seed;

  if (request.schema == ExpectedSchema::ScoreWithJustification) {
    Rng collapse(derive_seed(seed, tkey + "#collapse"));
    int score;
    if (collapse.uniform() < truth_options_.si_mode_collapse) {
      score = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()) + 1;
    } else {
      Rng draw(derive_seed(seed, request.key.to_string() + "#" + std::to_string(request.repeat_index)));
      score = static_cast<int>(draw.categorical(probs)) + 1;
    }
    return nlohmann::json{{"justification", "simulated respondent"}, {"score", score}}.dump();
  }

  Rng noise(derive_seed(seed, request.key.to_string() + "#dd"));
  std::vector<double> values(probs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    values[i] = std::max(0.0, 100.0 * probs[i] + truth_options_.dd_noise_sd * noise.normal());
    total += values[i];
  }
  if (!(total > 0.0)) {
    for (std::size_t i = 0; i < probs.size(); ++i) values[i] = 100.0 * probs[i];
    total = 100.0;
  }
  for (double& v : values) v *= 100.0 / total;
  const std::string justification =
      request.schema == ExpectedSchema::DistributionWithJustification ? "simulated population" : "";
  return nlohmann::json{{"justification", justification}, {"distribution", values}}.dump();
}

}  // namespace aipoll
