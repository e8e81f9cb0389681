#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "aipoll/model.hpp"
#include "aipoll/util/io.hpp"

namespace aipoll::test {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(AIPOLL_FIXTURES) / rel; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "aipoll") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Random probability vector with strictly positive mass.
inline OpinionDistribution random_distribution(std::mt19937_64& gen, int cardinality) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(cardinality));
  for (auto& x : raw) x = u(gen) + 1e-3;
  return make_distribution(raw, cardinality);
}

inline OpinionDistribution dist(std::vector<double> p) {
  const int c = static_cast<int>(p.size());
  return make_distribution(p, c);
}

/// All files under `root` with their bytes, keyed by relative path.
inline std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[e.path().lexically_relative(root).generic_string()] = read_text_file(e.path());
  }
  return out;
}

}  // namespace aipoll::test
