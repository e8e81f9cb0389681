#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "aipoll/gateway.hpp"

namespace aipoll {

struct MockReply {
  int status = 200;
  std::string content;
};

/// Replies for every canonical key matching `pattern` ('*' matches any run
/// of characters). Replies are consumed per (key, repeat) attempt, the last
/// one repeating; with `by_repeat` the repeat index selects the reply
/// instead, cycling.
struct MockScriptEntry {
  std::string pattern;
  std::vector<MockReply> replies;
  bool by_repeat = false;
};

struct MockTruthOptions {
  std::uint64_t seed = 0;
  /// Gaussian noise, in percentage points, added to each DD category.
  double dd_noise_sd = 2.0;
  /// Probability that an SI permutation answers its modal category on every
  /// repeat instead of sampling.
  double si_mode_collapse = 0.0;
};

/// `*` matches any run of characters, `?` any single one.
bool glob_match(std::string_view pattern, std::string_view text) noexcept;

/// `<question_id>|<ideology>|<gender>|<race>`, the truth-table key.
std::string truth_key(const std::string& question_id, const DemographicCell& cell);

/// Offline backend. Scripted entries win; otherwise, when a truth table is
/// loaded, DD replies are truth plus noise and SI replies are draws from the
/// truth. Every reply is a pure function of (seed, key, repeat, attempt), so
/// runs are reproducible under any thread schedule.
class MockChatBackend final : public ChatBackend {
 public:
  MockChatBackend() = default;

  void add_script(std::vector<MockScriptEntry> entries);
  /// Loads `{"entries":[{"match": "...", "by_repeat": false,
  ///          "replies":[{"status":200, "content": {...} | "raw"}]}]}`.
  void load_script_file(const std::filesystem::path& path);
  void set_truth(std::map<std::string, OpinionDistribution> truth, MockTruthOptions options);
  /// Simulates a crash: every call after the first `n` fails with Error(Auth).
  void set_abort_after(std::optional<std::size_t> n) { abort_after_ = n; }

  std::string complete(const CompletionRequest& request) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::string truth_reply(const CompletionRequest& request) const;

  std::vector<MockScriptEntry> script_;
  std::map<std::string, OpinionDistribution> truth_;
  MockTruthOptions truth_options_;
  std::optional<std::size_t> abort_after_;
  std::atomic<std::size_t> calls_{0};
  std::mutex mutex_;
  std::map<std::string, int> attempts_;
};

}  // namespace aipoll
