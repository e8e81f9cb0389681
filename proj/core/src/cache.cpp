#include "aipoll/cache.hpp"

#include "aipoll/error.hpp"
#include "aipoll/util/io.hpp"

namespace aipoll {

QueryCache::QueryCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_)) {
    for_each_jsonl(path_, [&](const nlohmann::json& j) {
      auto r = query_record_from_json(j);
      records_.insert_or_assign(lookup_key(r.key.to_string(), r.repeat_index, r.prompt_hash), std::move(r));
    });
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(ErrorCode::Io, "cannot append to cache " + path_.string());
}

std::string QueryCache::lookup_key(const std::string& key, int repeat_index, const std::string& prompt_hash) {
  return key + "#" + std::to_string(repeat_index) + "#" + prompt_hash;
}

std::optional<QueryRecord> QueryCache::find(const PermutationKey& key, int repeat_index,
                                            const std::string& prompt_hash) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(lookup_key(key.to_string(), repeat_index, prompt_hash));
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void QueryCache::append(const QueryRecord& record) {
  const std::string line = to_json(record).dump() + "\n";
  std::lock_guard lock(mutex_);
  out_ << line;
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "write to cache " + path_.string() + " failed");
  records_.insert_or_assign(lookup_key(record.key.to_string(), record.repeat_index, record.prompt_hash), record);
}

std::size_t QueryCache::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

}  // namespace aipoll
