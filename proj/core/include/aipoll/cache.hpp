#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "aipoll/gateway.hpp"

namespace aipoll {

/// Append-only JSON-lines store of QueryRecords, keyed by canonical
/// permutation key + repeat index + SHA-256 of the prompt text. Appends are
/// serialized and flushed per record so an interrupted run keeps everything
/// it finished.
class QueryCache {
 public:
  explicit QueryCache(std::filesystem::path path);

  static std::string lookup_key(const std::string& key, int repeat_index, const std::string& prompt_hash);

  std::optional<QueryRecord> find(const PermutationKey& key, int repeat_index,
                                   const std::string& prompt_hash) const;
  void append(const QueryRecord& record);

  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, QueryRecord> records_;
  std::ofstream out_;
};

}  // namespace aipoll
