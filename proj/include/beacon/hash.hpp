#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace beacon {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string to_hex(const Sha256Digest& digest);
// Throws ErrorKind::Parse unless `hex` is 64 lowercase hex characters.
Sha256Digest from_hex(std::string_view hex);
bool is_sha256_hex(std::string_view hex) noexcept;

// 64-bit FNV-1a (offset basis 0xcbf29ce484222325, prime 0x100000001b3).
// `seed` is hashed first as 8 little-endian bytes, then `data`.
std::uint64_t fnv1a64(std::string_view data) noexcept;
std::uint64_t fnv1a64_seeded(std::uint64_t seed, std::string_view data) noexcept;

}  // namespace beacon
