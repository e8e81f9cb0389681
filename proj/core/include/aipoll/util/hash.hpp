#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace aipoll {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes; throws Error(Io) if unreadable.
std::string sha256_file(const std::filesystem::path& path);

/// FNV-1a, 64 bit. Used for seed derivation, never for content identity.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace aipoll
