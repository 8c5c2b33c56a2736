#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace ctrank {

/// SHA-256 digest as lowercase hex.
std::string sha256_hex(std::string_view data);

std::array<std::uint8_t, 32> sha256_bytes(std::string_view data);

/// Streaming digest of a file's contents. Throws Error(Io) if unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace ctrank
