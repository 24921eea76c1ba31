#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace sfk
{

/// 64-bit FNV-1a as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : bytes)
    {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace sfk
