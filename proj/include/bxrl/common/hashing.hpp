#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace bxrl {

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::filesystem::path& path);

// 64-bit FNV-1a, used for naming RNG streams.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace bxrl
