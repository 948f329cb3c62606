#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pmiv {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// FNV-1a 64 over raw bytes. Pinned: every digest in the project is built on it.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffsetBasis) noexcept
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

/// 16 lowercase hex digits.
std::string to_hex(std::uint64_t value);

inline std::string digest_hex(std::string_view bytes) { return to_hex(fnv1a64(bytes)); }

} // namespace pmiv
