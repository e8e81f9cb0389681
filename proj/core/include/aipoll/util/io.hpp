#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace aipoll {

std::string read_text_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never see a
/// half-written artifact.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Fixed-point text, for aligned tables.
std::string format_fixed(double value, int decimals);

std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);
std::string join_csv(const std::vector<std::string>& fields);

/// Iterates JSON-lines records, skipping blank lines and the provenance
/// header line (`{"meta": ...}`) that stage outputs start with.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&)>& fn);

/// Provenance stamped into every stage output.
struct Provenance {
  std::string run_id;
  nlohmann::json corpus_hashes = nlohmann::json::object();

  nlohmann::json to_json() const;
  /// `{"meta":{...}}` line for JSON-lines files.
  std::string jsonl_header() const;
  /// `# run_id=... questions=...` line for delimited and text files.
  std::string comment_header() const;
};

}  // namespace aipoll
